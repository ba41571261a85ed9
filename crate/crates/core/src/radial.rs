//! Radial grids for the hyperradial boundary-value problem.

/// Strictly increasing radial nodes starting at the origin.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    nodes: Vec<f64>,
}

impl RadialGrid {
    /// Uniform grid with `n` intervals on [0, r_max].
    pub fn uniform(r_max: f64, n: usize) -> Self {
        assert!(r_max > 0.0 && n >= 2);
        let h = r_max / n as f64;
        let mut nodes: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        // avoid accumulated rounding at the right end
        *nodes.last_mut().unwrap() = r_max;
        RadialGrid { nodes }
    }

    /// Grid from explicit nodes; the first node must be 0 and the rest
    /// strictly increasing.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self, String> {
        if nodes.len() < 3 {
            return Err("need at least three nodes".into());
        }
        if nodes[0] != 0.0 {
            return Err("grid must start at r = 0".into());
        }
        if !nodes.windows(2).all(|w| w[1] > w[0]) {
            return Err("nodes must be strictly increasing".into());
        }
        Ok(RadialGrid { nodes })
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

    pub fn r_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Number of nodes with r <= radius.
    pub fn nodes_within(&self, radius: f64) -> usize {
        self.nodes.partition_point(|&r| r <= radius)
    }
}
