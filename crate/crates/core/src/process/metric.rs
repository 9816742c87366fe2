use serde::{Deserialize, Serialize};

use super::point::StatePoint;
use crate::error::{Error, Result};

/// Ground metric on the state space.
#[derive(Clone, Debug, PartialEq)]
pub enum Ground {
    /// Euclidean norm of the coordinate difference.
    Euclidean,
    /// Sum of absolute coordinate differences; `|x - y|` in one dimension.
    Absolute,
    /// Explicit distance table on a finite set of points.
    Table(DistanceTable),
}

/// A finite metric given by its distance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceTable {
    points: Vec<StatePoint>,
    dist: Vec<Vec<f64>>,
}

impl DistanceTable {
    /// Checks symmetry, nonnegativity, zero diagonal, strictly positive
    /// off-diagonal entries and the triangle inequality (exhaustively).
    pub fn new(points: Vec<StatePoint>, dist: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidMetric("empty distance table".into()));
        }
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidMetric(format!(
                "distance table must be {n}x{n}"
            )));
        }
        for i in 0..n {
            for j in 0..n {
                if j > i && points[i] == points[j] {
                    return Err(Error::InvalidMetric(format!(
                        "duplicate table point {}",
                        points[i]
                    )));
                }
                let d = dist[i][j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidMetric(format!("entry ({i},{j}) = {d}")));
                }
                if (i == j) != (d == 0.0) {
                    return Err(Error::InvalidMetric(format!(
                        "entry ({i},{j}) = {d} breaks identity of indiscernibles"
                    )));
                }
                if d != dist[j][i] {
                    return Err(Error::InvalidMetric(format!("table not symmetric at ({i},{j})")));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if dist[i][k] > dist[i][j] + dist[j][k] + 1e-12 {
                        return Err(Error::InvalidMetric(format!(
                            "triangle inequality fails for ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        Ok(Self { points, dist })
    }

    pub fn points(&self) -> &[StatePoint] {
        &self.points
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.dist
    }

    fn index_of(&self, x: &StatePoint) -> Result<usize> {
        self.points
            .iter()
            .position(|p| p == x)
            .ok_or_else(|| Error::UnknownTablePoint(x.coords().to_vec()))
    }

    pub fn distance(&self, x: &StatePoint, y: &StatePoint) -> Result<f64> {
        Ok(self.dist[self.index_of(x)?][self.index_of(y)?])
    }
}

/// Ground metric together with the transport order `p`.
///
/// With `bounded` set, every ground distance is replaced by `min(1, ρ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSpec {
    pub ground: Ground,
    p: f64,
    pub bounded: bool,
}

impl MetricSpec {
    pub fn new(ground: Ground, p: f64, bounded: bool) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidMetric(format!("order p = {p} must be >= 1")));
        }
        Ok(Self { ground, p, bounded })
    }

    /// `|x - y|`-type metric of order `p`.
    pub fn absolute(p: f64) -> Self {
        Self::new(Ground::Absolute, p, false).expect("valid order")
    }

    pub fn euclidean(p: f64) -> Self {
        Self::new(Ground::Euclidean, p, false).expect("valid order")
    }

    pub fn with_bounded(mut self, bounded: bool) -> Self {
        self.bounded = bounded;
        self
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// ρ(x, y), after the optional `min(1, ·)` transform.
    pub fn ground_distance(&self, x: &StatePoint, y: &StatePoint) -> Result<f64> {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                found: y.dim(),
            });
        }
        let d = match &self.ground {
            Ground::Euclidean => x
                .coords()
                .iter()
                .zip(y.coords())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            Ground::Absolute => x
                .coords()
                .iter()
                .zip(y.coords())
                .map(|(a, b)| (a - b).abs())
                .sum(),
            Ground::Table(table) => table.distance(x, y)?,
        };
        Ok(if self.bounded { d.min(1.0) } else { d })
    }

    /// ρ(x, y)^p.
    pub fn ground_cost(&self, x: &StatePoint, y: &StatePoint) -> Result<f64> {
        Ok(self.pow(self.ground_distance(x, y)?))
    }

    /// Σ_t ρ(x_t, y_t)^p: the p-th power of the path distance.
    pub fn path_cost(&self, x: &[StatePoint], y: &[StatePoint]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::RaggedPaths {
                index: 1,
                expected: x.len(),
                found: y.len(),
            });
        }
        x.iter()
            .zip(y)
            .map(|(a, b)| self.ground_cost(a, b))
            .sum()
    }

    /// Path distance `(Σ_t ρ^p)^{1/p}`.
    pub fn path_distance(&self, x: &[StatePoint], y: &[StatePoint]) -> Result<f64> {
        Ok(self.root(self.path_cost(x, y)?))
    }

    pub(crate) fn pow(&self, d: f64) -> f64 {
        if self.p == 1.0 {
            d
        } else if self.p == 2.0 {
            d * d
        } else {
            d.powf(self.p)
        }
    }

    /// Turns an optimal p-th-power value into a distance.
    pub fn root(&self, value: f64) -> f64 {
        let value = value.max(0.0);
        if self.p == 1.0 {
            value
        } else if self.p == 2.0 {
            value.sqrt()
        } else {
            value.powf(1.0 / self.p)
        }
    }
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self::absolute(1.0)
    }
}

/// File representation of a metric block.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MetricBlock {
    #[serde(default)]
    pub ground: Option<String>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub bounded: Option<bool>,
    #[serde(default)]
    pub table: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
}

impl MetricBlock {
    pub fn to_spec(&self) -> Result<MetricSpec> {
        let ground = match self.ground.as_deref().unwrap_or("absolute") {
            "euclidean" => Ground::Euclidean,
            "absolute" => Ground::Absolute,
            "table" => {
                let dist = self
                    .table
                    .clone()
                    .ok_or_else(|| Error::InvalidMetric("table ground needs `table`".into()))?;
                let points = self
                    .points
                    .clone()
                    .ok_or_else(|| Error::InvalidMetric("table ground needs `points`".into()))?
                    .into_iter()
                    .map(StatePoint::new)
                    .collect::<Result<Vec<_>>>()?;
                Ground::Table(DistanceTable::new(points, dist)?)
            }
            other => return Err(Error::InvalidMetric(format!("unknown ground `{other}`"))),
        };
        MetricSpec::new(ground, self.p.unwrap_or(1.0), self.bounded.unwrap_or(false))
    }
}
