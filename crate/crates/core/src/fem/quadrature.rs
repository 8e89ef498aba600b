//! Reference-element quadrature rules in barycentric form.
//!
//! Weights are normalized to sum to one; the physical weight of a point is
//! the normalized weight times the element measure.

/// One node of a reference rule: barycentric coordinates and a normalized weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleNode {
    pub bary: [f64; 3],
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Polynomial degree integrated exactly.
    pub order: usize,
    pub nodes: Vec<RuleNode>,
}

impl QuadratureRule {
    /// Three-point Gauss–Legendre rule on a segment (exact to degree 5).
    pub fn gauss_segment() -> Self {
        let d = 0.5 * (0.6f64).sqrt();
        let pts = [(0.5 - d, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + d, 5.0 / 18.0)];
        QuadratureRule {
            order: 5,
            nodes: pts
                .iter()
                .map(|&(xi, w)| RuleNode {
                    bary: [1.0 - xi, xi, 0.0],
                    weight: w,
                })
                .collect(),
        }
    }

    /// Seven-point Radon rule on a triangle (exact to degree 5).
    pub fn radon_triangle() -> Self {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let b1 = (9.0 + 2.0 * s15) / 21.0;
        let w1 = (155.0 - s15) / 1200.0;
        let a2 = (6.0 + s15) / 21.0;
        let b2 = (9.0 - 2.0 * s15) / 21.0;
        let w2 = (155.0 + s15) / 1200.0;
        let mut nodes = vec![RuleNode {
            bary: [1.0 / 3.0; 3],
            weight: 9.0 / 40.0,
        }];
        for &(a, b, w) in &[(a1, b1, w1), (a2, b2, w2)] {
            nodes.push(RuleNode { bary: [b, a, a], weight: w });
            nodes.push(RuleNode { bary: [a, b, a], weight: w });
            nodes.push(RuleNode { bary: [a, a, b], weight: w });
        }
        QuadratureRule { order: 5, nodes }
    }

    pub fn for_dimension(dim: usize) -> Self {
        if dim == 1 {
            Self::gauss_segment()
        } else {
            Self::radon_triangle()
        }
    }
}
