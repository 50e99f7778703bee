//! Graded one-dimensional meshes aligned with profile pieces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::Profile;

/// Resolution controls for [`Mesh1D::graded`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshControl {
    /// Minimum number of elements on every profile piece.
    pub min_per_piece: usize,
    /// Elements per `ε` of piece length.
    pub per_epsilon: f64,
    /// Elements per decay length `1/√λ` of the mode.
    pub per_decay_length: f64,
    /// Uniform bisections applied after grading.
    pub refine: u32,
    /// Hard cap on the element count.
    pub max_elements: usize,
}

impl Default for MeshControl {
    fn default() -> Self {
        MeshControl {
            min_per_piece: 16,
            per_epsilon: 8.0,
            per_decay_length: 8.0,
            refine: 0,
            max_elements: 2_000_000,
        }
    }
}

impl MeshControl {
    pub fn refined(mut self, levels: u32) -> Self {
        self.refine += levels;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh1D {
    nodes: Vec<f64>,
}

impl Mesh1D {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Mesh1D> {
        if nodes.len() < 2 {
            return Err(Error::InvalidModeProblem("a mesh needs at least two nodes".into()));
        }
        if nodes.iter().any(|t| !t.is_finite()) || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidModeProblem("mesh nodes must be finite and strictly increasing".into()));
        }
        Ok(Mesh1D { nodes })
    }

    pub fn uniform(a: f64, b: f64, elements: usize) -> Result<Mesh1D> {
        let n = elements.max(1);
        Mesh1D::from_nodes((0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect())
    }

    /// Piecewise-uniform mesh with every profile junction as a node.
    ///
    /// A piece of length `ℓ` receives
    /// `max(min_per_piece, ⌈ℓ/ε · per_epsilon⌉, ⌈ℓ√λ · per_decay_length⌉)`
    /// elements before `refine` bisections. The decay term keeps the
    /// boundary layer `e^{-√λ t}` of high modes resolved and keeps the
    /// assembled off-diagonals nonpositive.
    pub fn graded(profile: &Profile, lambda: f64, control: &MeshControl) -> Result<Mesh1D> {
        let eps = profile.epsilon();
        let rate = lambda.max(0.0).sqrt();
        let factor = 1usize << control.refine.min(24);
        let mut nodes = vec![profile.domain().0];
        for piece in profile.pieces() {
            let len = piece.length();
            let by_eps = (len / eps * control.per_epsilon).ceil() as usize;
            let by_decay = (len * rate * control.per_decay_length).ceil() as usize;
            let count = control.min_per_piece.max(by_eps).max(by_decay).max(1) * factor;
            if nodes.len() + count > control.max_elements + 1 {
                return Err(Error::InvalidModeProblem(format!(
                    "mesh would exceed {} elements",
                    control.max_elements
                )));
            }
            for i in 1..count {
                nodes.push(piece.start + len * i as f64 / count as f64);
            }
            nodes.push(piece.end);
        }
        Mesh1D::from_nodes(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn element_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn max_width(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Split every element at its midpoint.
    pub fn bisected(&self) -> Mesh1D {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(self.nodes[self.nodes.len() - 1]);
        Mesh1D { nodes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileLabel;

    #[test]
    fn junctions_are_nodes() {
        let p = Profile::make(ProfileLabel::Conf1, 0.05, 1.0, true).unwrap();
        let m = Mesh1D::graded(&p, 1.0, &MeshControl::default()).unwrap();
        for j in p.junctions() {
            assert!(m.nodes().contains(&j), "missing junction {j}");
        }
    }

    #[test]
    fn pieces_meet_minimum_resolution() {
        let p = Profile::make(ProfileLabel::Warped, 0.0125, 0.4, true).unwrap();
        let m = Mesh1D::graded(&p, 0.0, &MeshControl::default()).unwrap();
        for piece in p.pieces() {
            let inside = m
                .nodes()
                .windows(2)
                .filter(|w| w[0] >= piece.start && w[1] <= piece.end)
                .count();
            let want = 16usize.max((piece.length() / 0.0125 * 8.0).ceil() as usize);
            assert!(inside >= want, "{inside} < {want}");
        }
    }

    #[test]
    fn bisection_halves_widths() {
        let m = Mesh1D::uniform(0.0, 1.0, 10).unwrap();
        let b = m.bisected();
        assert_eq!(b.element_count(), 20);
        assert!((b.max_width() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn rejects_unsorted_nodes() {
        assert!(Mesh1D::from_nodes(vec![0.0, 0.5, 0.5]).is_err());
        assert!(Mesh1D::from_nodes(vec![0.0]).is_err());
    }
}
