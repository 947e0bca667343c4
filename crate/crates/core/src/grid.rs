use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Uniform,
    Geometric,
    Irregular,
}

/// Strictly increasing radial nodes `r_0 < r_1 < ... < r_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    spacing: Spacing,
}

impl RadialGrid {
    pub fn uniform(start: f64, end: f64, len: usize) -> Result<Self> {
        if len < 3 {
            return Err(Error::Grid(format!("need at least 3 nodes, got {len}")));
        }
        if !(start >= 0.0) || !(end > start) || !end.is_finite() {
            return Err(Error::Grid(format!("bad interval [{start}, {end}]")));
        }
        let h = (end - start) / (len - 1) as f64;
        let mut nodes: Vec<f64> = (0..len).map(|i| start + h * i as f64).collect();
        nodes[len - 1] = end;
        Self::checked(nodes, Spacing::Uniform)
    }

    pub fn geometric(start: f64, end: f64, len: usize) -> Result<Self> {
        if len < 3 {
            return Err(Error::Grid(format!("need at least 3 nodes, got {len}")));
        }
        if !(start > 0.0) || !(end > start) || !end.is_finite() {
            return Err(Error::Grid(format!("geometric grid needs 0 < start < end, got [{start}, {end}]")));
        }
        let ratio = (end / start).ln() / (len - 1) as f64;
        let mut nodes: Vec<f64> = (0..len).map(|i| start * (ratio * i as f64).exp()).collect();
        nodes[0] = start;
        nodes[len - 1] = end;
        Self::checked(nodes, Spacing::Geometric)
    }

    /// Geometric grid ending exactly at `end` whose nodes include every
    /// `end / 2^j` down to `start`, with `per_doubling` nodes per octave.
    pub fn doubling(start: f64, end: f64, per_doubling: usize) -> Result<Self> {
        if per_doubling == 0 || !(start > 0.0) || !(end > start) {
            return Err(Error::Grid(format!("bad doubling grid [{start}, {end}]")));
        }
        let octaves = (end / start).log2().ceil() as usize;
        let count = octaves * per_doubling;
        let mut nodes: Vec<f64> = (0..=count)
            .rev()
            .map(|j| {
                let oct = j / per_doubling;
                let frac = (j % per_doubling) as f64 / per_doubling as f64;
                end / 2f64.powi(oct as i32) / 2f64.powf(frac)
            })
            .collect();
        nodes[count] = end;
        Self::checked(nodes, Spacing::Geometric)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        Self::checked(nodes, Spacing::Irregular)
    }

    fn checked(nodes: Vec<f64>, spacing: Spacing) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::Grid(format!("need at least 3 nodes, got {}", nodes.len())));
        }
        if let Some(i) = nodes.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if nodes[0] < 0.0 {
            return Err(Error::Grid("negative radius".into()));
        }
        if spacing == Spacing::Geometric && nodes[0] <= 0.0 {
            return Err(Error::Grid("geometric grid must start above 0".into()));
        }
        if let Some(w) = nodes.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Grid(format!("nodes not increasing at index {}", w + 1)));
        }
        Ok(Self { nodes, spacing })
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

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn first(&self) -> f64 {
        self.nodes[0]
    }

    pub fn last(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Index of the node equal to `r` up to a relative 1e-12.
    pub fn index_of(&self, r: f64) -> Option<usize> {
        let i = self.nodes.partition_point(|&x| x < r * (1.0 - 1e-12));
        (i < self.nodes.len() && (self.nodes[i] - r).abs() <= 1e-12 * r.abs().max(1e-300)).then_some(i)
    }
}
