use crate::error::{Error, Result};

/// Strictly increasing bond-amount nodes starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BGrid {
    nodes: Vec<f64>,
    /// Leading nodes that are exact multiples of a spacing: (count, spacing).
    uniform: Option<(usize, f64)>,
}

const BASE_NODES: usize = 305;
const BASE_UNIFORM: usize = 241;

impl BGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 {
            return Err(Error::InvalidGrid("bond grid needs at least two nodes starting at 0".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || !nodes[nodes.len() - 1].is_finite() {
            return Err(Error::InvalidGrid("bond grid must be strictly increasing".into()));
        }
        Ok(Self { nodes, uniform: None })
    }

    /// Uniform nodes on `[0, b_fine]` followed by geometric spacing up to
    /// `b_max`. Counts `305 * 2^k - (2^k - 1)` are built from the 305 node
    /// base by midpoint insertion so that coarser grids are nested.
    pub fn build(n_b: usize, b_fine: f64, b_max: f64) -> Result<Self> {
        if n_b < 4 {
            return Err(Error::InvalidGrid(format!("need at least 4 bond nodes, got {n_b}")));
        }
        if !(b_fine > 0.0 && b_max > b_fine) {
            return Err(Error::InvalidGrid("need 0 < b_fine < b_max".into()));
        }
        let mut base = n_b;
        let mut levels = 0;
        while base > BASE_NODES && (base - 1).is_multiple_of(2) {
            base = (base - 1) / 2 + 1;
            levels += 1;
        }
        let mut g = if base == BASE_NODES {
            Self::base(BASE_NODES, BASE_UNIFORM, b_fine, b_max)
        } else {
            levels = 0;
            let n_lin = ((n_b as f64 * BASE_UNIFORM as f64 / BASE_NODES as f64).round() as usize).clamp(2, n_b - 1);
            Self::base(n_b, n_lin, b_fine, b_max)
        };
        for _ in 0..levels {
            g = g.refine();
        }
        debug_assert_eq!(g.len(), n_b);
        if let Some((count, h)) = g.uniform {
            for (k, b) in g.nodes.iter_mut().take(count).enumerate() {
                *b = k as f64 * h;
            }
        }
        Ok(g)
    }

    fn base(n: usize, n_lin: usize, b_fine: f64, b_max: f64) -> Self {
        let h = b_fine / (n_lin - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_lin).map(|i| i as f64 * h).collect();
        let n_geo = n - n_lin;
        let ratio = (b_max / b_fine).powf(1.0 / n_geo as f64);
        for i in 1..=n_geo {
            nodes.push(if i == n_geo { b_max } else { b_fine * ratio.powi(i as i32) });
        }
        Self { nodes, uniform: Some((n_lin, h)) }
    }

    /// Insert the midpoint of every interval.
    pub fn refine(&self) -> Self {
        let mut out = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            out.push(w[0]);
            out.push(0.5 * (w[0] + w[1]));
        }
        out.push(self.nodes[self.nodes.len() - 1]);
        let uniform = self.uniform.map(|(c, h)| (2 * c - 1, 0.5 * h));
        Self { nodes: out, uniform }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number and spacing of the leading equally spaced nodes `k h`.
    pub fn uniform_prefix(&self) -> Option<(usize, f64)> {
        self.uniform
    }

    pub fn b_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Left interval index and weight for linear interpolation at `b`,
    /// flat outside `[0, b_max]`.
    pub fn bracket(&self, b: f64) -> (usize, f64) {
        let n = self.nodes.len();
        if b <= 0.0 {
            return (0, 0.0);
        }
        if b >= self.nodes[n - 1] {
            return (n - 2, 1.0);
        }
        let k = self.nodes.partition_point(|&v| v <= b) - 1;
        let k = k.min(n - 2);
        (k, (b - self.nodes[k]) / (self.nodes[k + 1] - self.nodes[k]))
    }
}
