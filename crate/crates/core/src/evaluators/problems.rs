//! Built-in synthetic inverse problems. Each has a smooth nonlinear forward
//! model `F_j(x) = sum_i A_ji sin(pi xn_i / 2) + b_j` over normalised
//! coordinates `xn`, with the target observation `y = F(x*)` for a recorded
//! reference state `x*`. Tables ship as plain-text fixtures.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use super::formulas::{inequality_error, reconstruction_error, BalanceError, Bounds, FeasibleDomainError, OrderingError};
use super::{ExplicitError, ImplicitModel, ProblemSpec};
use crate::error::{GeeseError, Result};

pub const BUILTIN_PROBLEMS: [&str; 3] = ["S1", "S2", "S3"];

const DEFAULT_EPSILON: f64 = 0.075;

macro_rules! fixture {
    ($name:literal) => {
        ($name, include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/", $name)))
    };
}

const EMBEDDED: &[(&str, &str)] = &[
    fixture!("S1.A"),
    fixture!("S1.b"),
    fixture!("S1.bounds"),
    fixture!("S1.xstar"),
    fixture!("S2.A"),
    fixture!("S2.b"),
    fixture!("S2.bounds"),
    fixture!("S2.xstar"),
    fixture!("S2.C"),
    fixture!("S2.d"),
    fixture!("S3.A"),
    fixture!("S3.b"),
    fixture!("S3.bounds"),
    fixture!("S3.xstar"),
];

#[derive(Debug, Clone)]
pub struct Table {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Table {
    fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    fn column(&self) -> Vec<f64> {
        self.values.clone()
    }
}

/// Parse a fixture: first line `rows cols`, then row-major values.
pub fn parse_table(name: &str, text: &str) -> Result<Table> {
    let bad = |reason: String| GeeseError::MalformedFixture { name: name.to_string(), reason };
    let mut tokens = text.split_whitespace();
    let mut dim = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| bad(format!("missing {what}")))?
            .parse::<usize>()
            .map_err(|e| bad(format!("bad {what}: {e}")))
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let values = tokens.map(|t| t.parse::<f64>().map_err(|e| bad(format!("bad value `{t}`: {e}")))).collect::<Result<Vec<_>>>()?;
    if values.len() != rows * cols {
        return Err(bad(format!("expected {} values, found {}", rows * cols, values.len())));
    }
    Ok(Table { rows, cols, values })
}

trait FixtureSource {
    fn read(&self, file: &str) -> Result<String>;
}

struct Embedded;

impl FixtureSource for Embedded {
    fn read(&self, file: &str) -> Result<String> {
        EMBEDDED
            .iter()
            .find(|(n, _)| *n == file)
            .map(|(_, t)| t.to_string())
            .ok_or_else(|| GeeseError::MissingFixture(file.into()))
    }
}

struct Directory<'a>(&'a Path);

impl FixtureSource for Directory<'_> {
    fn read(&self, file: &str) -> Result<String> {
        let path = self.0.join(file);
        if !path.exists() {
            return Err(GeeseError::MissingFixture(path));
        }
        std::fs::read_to_string(&path).map_err(|e| GeeseError::io(path, e))
    }
}

/// Forward model plus optional quadratic constraints `sum_j C_ij xn_j^2 - d_i <= 0`.
#[derive(Debug, Clone)]
pub struct SineObservationModel {
    a: Table,
    b: Vec<f64>,
    bounds: Bounds,
    target: Vec<f64>,
    constraints: Option<(Table, Vec<f64>)>,
}

impl SineObservationModel {
    fn new(a: Table, b: Vec<f64>, bounds: Bounds, reference: &[f64], constraints: Option<(Table, Vec<f64>)>) -> Result<Self> {
        if a.cols != bounds.dim() || b.len() != a.rows {
            return Err(GeeseError::MalformedFixture {
                name: "forward model".into(),
                reason: format!("A is {}x{}, b has {}, state dim {}", a.rows, a.cols, b.len(), bounds.dim()),
            });
        }
        let mut model = SineObservationModel { a, b, bounds, target: Vec::new(), constraints };
        model.target = model.observe(reference);
        if let Some(index) = model.target.iter().position(|y| *y == 0.0) {
            return Err(GeeseError::InvalidTarget { index });
        }
        Ok(model)
    }

    pub fn observe(&self, x: &[f64]) -> Vec<f64> {
        let s: Vec<f64> = self.bounds.normalize(x).iter().map(|u| (PI * u / 2.0).sin()).collect();
        (0..self.a.rows).map(|j| self.b[j] + self.a.row(j).iter().zip(&s).map(|(a, s)| a * s).sum::<f64>()).collect()
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    fn constraint_values(&self, x: &[f64]) -> Option<Vec<f64>> {
        let (c, d) = self.constraints.as_ref()?;
        let u = self.bounds.normalize(x);
        Some((0..c.rows).map(|i| c.row(i).iter().zip(&u).map(|(c, u)| c * u * u).sum::<f64>() - d[i]).collect())
    }
}

impl ImplicitModel for SineObservationModel {
    fn count(&self) -> usize {
        1 + usize::from(self.constraints.is_some())
    }

    fn obs_dim(&self) -> usize {
        self.a.rows
    }

    fn errors(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut e = vec![reconstruction_error(&self.observe(x), &self.target)?];
        if let Some(c) = self.constraint_values(x) {
            e.push(inequality_error(&c)?);
        }
        Ok(e)
    }
}

fn read_table(src: &dyn FixtureSource, file: &str) -> Result<Table> {
    parse_table(file, &src.read(file)?)
}

fn build(name: &str, src: &dyn FixtureSource) -> Result<ProblemSpec> {
    if !BUILTIN_PROBLEMS.contains(&name) {
        return Err(GeeseError::UnknownProblem(name.to_string()));
    }
    let bounds_t = read_table(src, &format!("{name}.bounds"))?;
    if bounds_t.rows != 2 {
        return Err(GeeseError::MalformedFixture { name: format!("{name}.bounds"), reason: "expected 2 rows".into() });
    }
    let bounds = Bounds::new(bounds_t.row(0).to_vec(), bounds_t.row(1).to_vec())?;
    let a = read_table(src, &format!("{name}.A"))?;
    let b = read_table(src, &format!("{name}.b"))?.column();
    let xstar = read_table(src, &format!("{name}.xstar"))?.values;
    if xstar.len() != bounds.dim() {
        return Err(GeeseError::MalformedFixture { name: format!("{name}.xstar"), reason: "wrong length".into() });
    }
    let domain: Arc<dyn ExplicitError> = Arc::new(FeasibleDomainError { bounds: bounds.clone() });
    let spec = match name {
        "S1" => {
            let model = SineObservationModel::new(a, b, bounds.clone(), &xstar, None)?;
            let balance: Arc<dyn ExplicitError> = Arc::new(BalanceError { bounds: bounds.clone() });
            ProblemSpec::new(name, bounds, vec![1.0, 0.1, 0.1], DEFAULT_EPSILON, Arc::new(model), vec![domain, balance])?
        }
        "S2" => {
            let c = read_table(src, "S2.C")?;
            let d = read_table(src, "S2.d")?.column();
            if c.cols != bounds.dim() || d.len() != c.rows {
                return Err(GeeseError::MalformedFixture { name: "S2.C".into(), reason: "shape mismatch with S2.d".into() });
            }
            let model = SineObservationModel::new(a, b, bounds.clone(), &xstar, Some((c, d)))?;
            // implicit elements first: reconstruction, constraints; then domain
            ProblemSpec::new(name, bounds, vec![1.0, 1.0, 0.1], DEFAULT_EPSILON, Arc::new(model), vec![domain])?
        }
        _ => {
            let model = SineObservationModel::new(a, b, bounds.clone(), &xstar, None)?;
            let ordering: Arc<dyn ExplicitError> = Arc::new(OrderingError);
            ProblemSpec::new(name, bounds, vec![1.0, 0.1, 10.0], DEFAULT_EPSILON, Arc::new(model), vec![domain, ordering])?
                .with_monotone_constraints(true)
        }
    };
    Ok(ProblemSpec { reference_state: Some(xstar), ..spec })
}

/// One of the built-in problems (`S1`, `S2`, `S3`) from the fixtures compiled
/// into the crate.
pub fn builtin_problem(name: &str) -> Result<ProblemSpec> {
    build(name, &Embedded)
}

/// Like [`builtin_problem`] but reads the fixture tables from `dir`.
pub fn load_problem(name: &str, dir: &Path) -> Result<ProblemSpec> {
    build(name, &Directory(dir))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluators::{balance_error, QueryLedger};

    #[test]
    fn dimensions_of_builtin_problems() {
        let dims = [("S1", 11, 1, 3), ("S2", 20, 2, 3), ("S3", 30, 1, 3)];
        for (name, d, k, h) in dims {
            let p = builtin_problem(name).unwrap();
            assert_eq!(p.state_dim(), d, "{name}");
            assert_eq!(p.implicit_count(), k, "{name}");
            assert_eq!(p.total_errors(), h, "{name}");
            assert_eq!(p.obs_dim(), 2, "{name}");
        }
        assert_eq!(builtin_problem("S1").unwrap().weights, vec![1.0, 0.1, 0.1]);
        assert_eq!(builtin_problem("S3").unwrap().weights, vec![1.0, 0.1, 10.0]);
        assert!(builtin_problem("S3").unwrap().monotone_constraints);
    }

    #[test]
    fn reference_state_reconstructs_target() {
        for name in BUILTIN_PROBLEMS {
            let p = builtin_problem(name).unwrap();
            let xstar = p.reference_state.clone().unwrap();
            let mut ledger = QueryLedger::new(1).unwrap();
            let r = crate::evaluators::evaluate(&p, &mut ledger, &xstar).unwrap();
            assert_eq!(r.error_vector[0], 0.0, "{name}");
            assert!(r.feasible, "{name}: {}", r.accumulated);
        }
        let s1 = builtin_problem("S1").unwrap();
        let xstar = s1.reference_state.clone().unwrap();
        let r = s1.assess(&xstar).unwrap();
        assert!(r.accumulated <= 0.1 * balance_error(&xstar, &s1.bounds).unwrap() + 1e-15);
    }

    #[test]
    fn s3_penalises_decreasing_states() {
        let p = builtin_problem("S3").unwrap();
        let mut x = p.reference_state.clone().unwrap();
        x.swap(3, 20);
        assert!(p.assess(&x).unwrap().error_vector[2] > 0.0);
    }

    #[test]
    fn unknown_and_missing_fixtures() {
        assert!(matches!(builtin_problem("S9"), Err(GeeseError::UnknownProblem(_))));
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_problem("S1", dir.path()), Err(GeeseError::MissingFixture(_))));
    }

    #[test]
    fn load_from_directory_matches_embedded() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
        let a = load_problem("S2", &dir).unwrap();
        let b = builtin_problem("S2").unwrap();
        let x = b.bounds.denormalize(&[0.3; 20]);
        assert_eq!(a.assess(&x).unwrap(), b.assess(&x).unwrap());
    }

    #[test]
    fn parse_table_errors() {
        assert!(parse_table("t", "2 2\n1 2 3").is_err());
        assert!(parse_table("t", "1 1\nabc").is_err());
        assert!(parse_table("t", "").is_err());
        let t = parse_table("t", "2 1\n1.5\n-2e-3\n").unwrap();
        assert_eq!(t.values, vec![1.5, -0.002]);
    }
}
