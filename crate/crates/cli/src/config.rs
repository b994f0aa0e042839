//! JSON problem description. Every block rejects unknown keys.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use vspectra::bvp::BoundaryConditions;
use vspectra::coefficients::{
    validate_spec, CoefficientSpec, EvenCoefficientSpec, FunctionDescriptor, OddCoefficientSpec,
    PolynomialCoefficientSpec, SpecDiagnostics,
};
use vspectra::io::parse_complex;
use vspectra::quadrature::{make_grid, GridRef, Scheme, SampledFunction};
use vspectra::reduction::{build_even, build_odd, build_polynomial, OperatorForm};
use vspectra::volterra::TriangularKernel;
use vspectra::C64;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Even,
    Odd,
    Polynomial,
    RawKernel,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: Option<Kind>,
    pub coefficients: Option<serde_json::Value>,
    #[serde(default)]
    pub grid: GridConfig,
    pub boundary: Option<BoundaryConfig>,
    pub spectral: Option<SpectralConfig>,
    /// Complex `a` for `L + aI`.
    pub shift: Option<String>,
    pub transform: Option<TransformConfig>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

fn default_points() -> usize {
    401
}

fn default_scheme() -> Scheme {
    Scheme::UniformTrapezoid
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            points: default_points(),
            scheme: default_scheme(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub alpha: Vec<Vec<String>>,
    pub l: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub m_values: Vec<usize>,
    pub test_function: Option<String>,
}

fn default_count() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformConfig {
    pub q: Vec<Vec<String>>,
    pub q_tilde: Vec<Vec<String>>,
    #[serde(default)]
    pub x0: f64,
    pub initial: Vec<String>,
    pub hat_at_x0: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvenBlock {
    n: usize,
    #[serde(default = "one")]
    b: String,
    p: Vec<String>,
    q: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct OddBlock {
    n: usize,
    q0: String,
    q0_prime: Option<String>,
    p: Vec<String>,
    #[serde(default)]
    q: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolynomialBlock {
    order: usize,
    p: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernelBlock {
    m: usize,
    n: usize,
    kernel_csv: PathBuf,
    u: Option<Vec<String>>,
}

fn one() -> String {
    "1".into()
}

fn descriptors(items: &[String]) -> CliResult<Vec<FunctionDescriptor>> {
    items
        .iter()
        .map(|s| FunctionDescriptor::parse(s).map_err(CliError::from))
        .collect()
}

fn block<T: DeserializeOwned>(cfg: &ProblemConfig) -> CliResult<T> {
    let value = cfg
        .coefficients
        .clone()
        .ok_or_else(|| CliError::Config("missing `coefficients` block".into()))?;
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("coefficients: {e}")))
}

pub fn complex_list(items: &[String]) -> CliResult<Vec<C64>> {
    items
        .iter()
        .map(|s| parse_complex(s).map_err(CliError::from))
        .collect()
}

/// Either a built form with its diagnostics, or the raw kernel read from disk.
pub struct Problem {
    pub form: OperatorForm,
    pub diagnostics: Option<SpecDiagnostics>,
}

impl ProblemConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let file = fs::File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ProblemConfig = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn grid(&self) -> CliResult<GridRef> {
        Ok(make_grid(self.grid.points, self.grid.scheme)?)
    }

    pub fn kind(&self) -> CliResult<Kind> {
        self.kind.ok_or_else(|| CliError::Config("missing `kind`".into()))
    }

    /// The closed-form spec behind an expression-derived kind.
    pub fn coefficient_spec(&self) -> CliResult<Option<CoefficientSpec>> {
        Ok(match self.kind()? {
            Kind::Even => {
                let b: EvenBlock = block(self)?;
                let q = match &b.q {
                    Some(q) => descriptors(q)?,
                    None => vec![FunctionDescriptor::zero(); b.n],
                };
                Some(CoefficientSpec::Even(EvenCoefficientSpec::new(
                    b.n,
                    FunctionDescriptor::parse(&b.b)?,
                    descriptors(&b.p)?,
                    q,
                )?))
            }
            Kind::Odd => {
                let b: OddBlock = block(self)?;
                let q0 = FunctionDescriptor::parse(&b.q0)?;
                let spec = match &b.q0_prime {
                    Some(d) => OddCoefficientSpec::new(b.n, q0, FunctionDescriptor::parse(d)?, descriptors(&b.p)?, descriptors(&b.q)?)?,
                    None => OddCoefficientSpec::with_derived_q0_prime(b.n, q0, descriptors(&b.p)?, descriptors(&b.q)?)?,
                };
                Some(CoefficientSpec::Odd(spec))
            }
            Kind::Polynomial => {
                let b: PolynomialBlock = block(self)?;
                Some(CoefficientSpec::Polynomial(PolynomialCoefficientSpec::new(b.order, descriptors(&b.p)?)?))
            }
            Kind::RawKernel => None,
        })
    }

    pub fn kernel_path(&self) -> CliResult<PathBuf> {
        let b: RawKernelBlock = block(self)?;
        Ok(self.base_dir.join(b.kernel_csv))
    }

    pub fn problem(&self, grid: &GridRef) -> CliResult<Problem> {
        if let Some(spec) = self.coefficient_spec()? {
            let diagnostics = validate_spec(&spec, grid);
            if diagnostics.has_errors() {
                let text: Vec<String> = diagnostics.messages.iter().map(|d| d.message.clone()).collect();
                return Err(CliError::Config(text.join("; ")));
            }
            let form = match &spec {
                CoefficientSpec::Even(s) => build_even(s, grid)?,
                CoefficientSpec::Odd(s) => build_odd(s, grid)?,
                CoefficientSpec::Polynomial(s) => build_polynomial(s, grid)?,
            };
            return Ok(Problem {
                form,
                diagnostics: Some(diagnostics),
            });
        }
        let b: RawKernelBlock = block(self)?;
        let path = self.base_dir.join(&b.kernel_csv);
        let file = fs::File::open(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let kernel = TriangularKernel::read_csv(grid, BufReader::new(file))?;
        let u = match &b.u {
            Some(items) => descriptors(items)?
                .iter()
                .map(|fd| vspectra::coefficients::evaluate(fd, grid))
                .collect::<Result<Vec<SampledFunction>, _>>()?,
            None => vec![SampledFunction::zeros(grid); b.n],
        };
        Ok(Problem {
            form: OperatorForm::raw(b.m, b.n, kernel, u)?,
            diagnostics: None,
        })
    }

    pub fn boundary(&self) -> CliResult<BoundaryConditions> {
        let b = self
            .boundary
            .as_ref()
            .ok_or_else(|| CliError::Config("missing `boundary` block".into()))?;
        let rows: Vec<Vec<C64>> = b.alpha.iter().map(|r| complex_list(r)).collect::<CliResult<_>>()?;
        Ok(BoundaryConditions::from_rows(&rows, b.l)?)
    }

    pub fn shift_value(&self) -> CliResult<Option<C64>> {
        self.shift.as_deref().map(|s| parse_complex(s).map_err(CliError::from)).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ProblemConfig, serde_json::Error> {
        serde_json::from_str(text)
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse(r#"{"kind": "even", "colour": 1}"#).is_err());
        assert!(parse(r#"{"grid": {"points": 11, "spacing": 2}}"#).is_err());
        let cfg = parse(r#"{"kind": "polynomial", "coefficients": {"order": 3, "p": ["0", "0"], "extra": 1}}"#).unwrap();
        assert!(matches!(cfg.coefficient_spec(), Err(CliError::Config(_))));
    }

    #[test]
    fn defaults() {
        let cfg = parse(r#"{"kind": "raw-kernel"}"#).unwrap();
        assert_eq!(cfg.grid.points, 401);
        assert_eq!(cfg.grid.scheme, Scheme::UniformTrapezoid);
        assert_eq!(cfg.kind, Some(Kind::RawKernel));
    }

    #[test]
    fn even_block_defaults_q_to_zero() {
        let cfg = parse(r#"{"kind": "even", "coefficients": {"n": 1, "p": ["H(x-0.5)"]}}"#).unwrap();
        let Some(CoefficientSpec::Even(spec)) = cfg.coefficient_spec().unwrap() else {
            panic!("even spec expected");
        };
        assert_eq!(spec.q.len(), 1);
        assert!(spec.q[0].is_structurally_zero());
    }
}
