//! Synthetic test problems with analytic gradients, and tabular datasets.

use std::path::Path;

use nalgebra::DMatrix;

use crate::design::Bounds;
use crate::error::{Error, Result};
use crate::optimizer::{Direction, Objective};

/// A synthetic multi-objective problem.
#[derive(Clone, Debug)]
pub struct BenchmarkSpec {
    pub name: &'static str,
    pub num_inputs: usize,
    pub num_objectives: usize,
    pub bounds: Vec<(f64, f64)>,
    /// All the bundled problems are minimisation problems.
    pub direction: Direction,
    evaluate: fn(&[f64]) -> Vec<f64>,
    gradient: fn(&[f64]) -> DMatrix<f64>,
}

pub const BENCHMARK_NAMES: [&str; 3] = ["schaffer_n1", "poloni", "viennet"];

impl BenchmarkSpec {
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        (self.evaluate)(x)
    }

    /// `n x m` matrix with entry `(j, i) = d f_i / d x_j`.
    pub fn gradient(&self, x: &[f64]) -> DMatrix<f64> {
        (self.gradient)(x)
    }

    pub fn design_bounds(&self) -> Bounds {
        Bounds::new(self.bounds.clone()).expect("benchmark bounds are valid")
    }
}

impl Objective for BenchmarkSpec {
    fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    fn num_objectives(&self) -> usize {
        self.num_objectives
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(BenchmarkSpec::evaluate(self, x))
    }

    fn analytic_gradient(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        Some(self.gradient(x))
    }
}

pub fn get_benchmark(name: &str) -> Result<BenchmarkSpec> {
    let spec = match name {
        "schaffer_n1" => BenchmarkSpec {
            name: "schaffer_n1",
            num_inputs: 1,
            num_objectives: 2,
            bounds: vec![(-10.0, 10.0)],
            direction: Direction::Minimise,
            evaluate: schaffer_n1,
            gradient: schaffer_n1_gradient,
        },
        "poloni" => BenchmarkSpec {
            name: "poloni",
            num_inputs: 2,
            num_objectives: 2,
            bounds: vec![(-std::f64::consts::PI, std::f64::consts::PI); 2],
            direction: Direction::Minimise,
            evaluate: poloni,
            gradient: poloni_gradient,
        },
        "viennet" => BenchmarkSpec {
            name: "viennet",
            num_inputs: 2,
            num_objectives: 3,
            bounds: vec![(-3.0, 3.0); 2],
            direction: Direction::Minimise,
            evaluate: viennet,
            gradient: viennet_gradient,
        },
        _ => {
            return Err(Error::UnknownBenchmark {
                name: name.to_string(),
                available: BENCHMARK_NAMES.join(", "),
            })
        }
    };
    Ok(spec)
}

/// `f0 = x^2`, `f1 = (x - 2)^2`.
fn schaffer_n1(x: &[f64]) -> Vec<f64> {
    vec![x[0] * x[0], (x[0] - 2.0).powi(2)]
}

fn schaffer_n1_gradient(x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 2.0 * (x[0] - 2.0)])
}

struct PoloniTerms {
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
}

fn poloni_terms(x: f64, y: f64) -> PoloniTerms {
    let (s1, c1, s2, c2) = (1f64.sin(), 1f64.cos(), 2f64.sin(), 2f64.cos());
    PoloniTerms {
        a1: 0.5 * s1 - 2.0 * c1 + s2 - 1.5 * c2,
        a2: 1.5 * s1 - c1 + 2.0 * s2 - 0.5 * c2,
        b1: 0.5 * x.sin() - 2.0 * x.cos() + y.sin() - 1.5 * y.cos(),
        b2: 1.5 * x.sin() - x.cos() + 2.0 * y.sin() - 0.5 * y.cos(),
    }
}

fn poloni(v: &[f64]) -> Vec<f64> {
    let (x, y) = (v[0], v[1]);
    let t = poloni_terms(x, y);
    vec![
        1.0 + (t.a1 - t.b1).powi(2) + (t.a2 - t.b2).powi(2),
        (x + 3.0).powi(2) + (y + 1.0).powi(2),
    ]
}

fn poloni_gradient(v: &[f64]) -> DMatrix<f64> {
    let (x, y) = (v[0], v[1]);
    let t = poloni_terms(x, y);
    let db1 = [0.5 * x.cos() + 2.0 * x.sin(), y.cos() + 1.5 * y.sin()];
    let db2 = [1.5 * x.cos() + x.sin(), 2.0 * y.cos() + 0.5 * y.sin()];
    let df0 = |j: usize| -2.0 * (t.a1 - t.b1) * db1[j] - 2.0 * (t.a2 - t.b2) * db2[j];
    DMatrix::from_row_slice(2, 2, &[df0(0), 2.0 * (x + 3.0), df0(1), 2.0 * (y + 1.0)])
}

fn viennet(v: &[f64]) -> Vec<f64> {
    let (x, y) = (v[0], v[1]);
    let r = x * x + y * y;
    vec![
        0.5 * r + r.sin(),
        (3.0 * x - 2.0 * y + 4.0).powi(2) / 8.0 + (x - y + 1.0).powi(2) / 27.0 + 15.0,
        1.0 / (r + 1.0) - 1.1 * (-r).exp(),
    ]
}

fn viennet_gradient(v: &[f64]) -> DMatrix<f64> {
    let (x, y) = (v[0], v[1]);
    let r = x * x + y * y;
    let u = 3.0 * x - 2.0 * y + 4.0;
    let w = x - y + 1.0;
    let f2 = |c: f64| -2.0 * c / (r + 1.0).powi(2) + 2.2 * c * (-r).exp();
    DMatrix::from_row_slice(
        2,
        3,
        &[
            x + 2.0 * x * r.cos(),
            6.0 * u / 8.0 + 2.0 * w / 27.0,
            f2(x),
            y + 2.0 * y * r.cos(),
            -4.0 * u / 8.0 - 2.0 * w / 27.0,
            f2(y),
        ],
    )
}

/// Column selection for [`load_tabular`].
#[derive(Clone, Debug, PartialEq)]
pub struct TabularSchema {
    pub inputs: Vec<String>,
    pub objectives: Vec<String>,
    pub directions: Vec<Direction>,
}

impl TabularSchema {
    /// Bumper and hood masses as inputs; head injury coefficient and mass
    /// as objectives, both minimised.
    pub fn crash_study() -> Self {
        Self {
            inputs: vec!["tbumper".into(), "thood".into()],
            objectives: vec!["HIC".into(), "Mass".into()],
            directions: vec![Direction::Minimise, Direction::Minimise],
        }
    }
}

/// A rectangular numeric dataset of candidate designs.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularDataset {
    pub input_names: Vec<String>,
    pub objective_names: Vec<String>,
    pub directions: Vec<Direction>,
    pub inputs: Vec<Vec<f64>>,
    pub objectives: Vec<Vec<f64>>,
}

impl TabularDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

impl Objective for TabularDataset {
    fn num_inputs(&self) -> usize {
        self.input_names.len()
    }

    fn num_objectives(&self) -> usize {
        self.objective_names.len()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inputs
            .iter()
            .position(|row| row.as_slice() == x)
            .map(|i| self.objectives[i].clone())
            .ok_or_else(|| Error::Evaluation(format!("no dataset row at {x:?}")))
    }
}

/// Reads a comma-separated file with a header row.
///
/// Rows are reported by file line (the header is line 1).
pub fn load_tabular(path: &Path, schema: &TabularSchema) -> Result<TabularDataset> {
    if schema.directions.len() != schema.objectives.len() {
        return Err(Error::Contract("one direction per objective column is required".into()));
    }
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let locate = |name: &String| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            path: display.clone(),
            row: 1,
            column: name.clone(),
            message: "missing column".into(),
        })
    };
    let input_cols = schema.inputs.iter().map(locate).collect::<Result<Vec<_>>>()?;
    let objective_cols = schema.objectives.iter().map(locate).collect::<Result<Vec<_>>>()?;

    let mut inputs = Vec::new();
    let mut objectives = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        let cell = |col: usize, name: &String| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    path: display.clone(),
                    row: line,
                    column: name.clone(),
                    message: format!("`{raw}` is not a finite number"),
                })
        };
        inputs.push(
            input_cols
                .iter()
                .zip(&schema.inputs)
                .map(|(c, n)| cell(*c, n))
                .collect::<Result<Vec<_>>>()?,
        );
        objectives.push(
            objective_cols
                .iter()
                .zip(&schema.objectives)
                .map(|(c, n)| cell(*c, n))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(TabularDataset {
        input_names: schema.inputs.clone(),
        objective_names: schema.objectives.clone(),
        directions: schema.directions.clone(),
        inputs,
        objectives,
    })
}
