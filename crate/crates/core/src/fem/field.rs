use super::mesh::Mesh;
use crate::error::{Error, Result};

/// Piecewise-linear function vanishing on the boundary, stored by its
/// coefficients on the free vertices of one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    mesh_id: u64,
    values: Vec<f64>,
}

/// Linear functional on discrete fields, one entry per free vertex, acting
/// through the Euclidean pairing of coefficient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    mesh_id: u64,
    values: Vec<f64>,
}

macro_rules! coefficient_vector {
    ($t:ident) => {
        impl $t {
            pub(crate) fn new_unchecked(mesh_id: u64, values: Vec<f64>) -> Self {
                $t { mesh_id, values }
            }

            pub fn mesh_id(&self) -> u64 {
                self.mesh_id
            }

            pub fn values(&self) -> &[f64] {
                &self.values
            }

            pub fn values_mut(&mut self) -> &mut [f64] {
                &mut self.values
            }

            pub fn into_values(self) -> Vec<f64> {
                self.values
            }

            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            pub fn scaled(&self, c: f64) -> Self {
                $t {
                    mesh_id: self.mesh_id,
                    values: self.values.iter().map(|v| c * v).collect(),
                }
            }

            /// `self + c * other`; both must live on the same mesh.
            pub fn add_scaled(&self, c: f64, other: &Self) -> Self {
                assert_eq!(self.mesh_id, other.mesh_id, "vectors from different meshes");
                $t {
                    mesh_id: self.mesh_id,
                    values: self
                        .values
                        .iter()
                        .zip(&other.values)
                        .map(|(a, b)| a + c * b)
                        .collect(),
                }
            }

            pub fn max_abs(&self) -> f64 {
                self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
            }

            pub fn norm(&self) -> f64 {
                self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
            }

            pub(crate) fn check(&self, mesh: &Mesh, op: &'static str) -> Result<()> {
                if self.mesh_id != mesh.id() || self.values.len() != mesh.num_free() {
                    return Err(Error::MeshMismatch { op });
                }
                Ok(())
            }
        }
    };
}

coefficient_vector!(DiscreteField);
coefficient_vector!(DualVector);

/// Duality pairing `<h, v>`.
pub fn pairing(h: &DualVector, v: &DiscreteField) -> Result<f64> {
    if h.mesh_id != v.mesh_id || h.values.len() != v.values.len() {
        return Err(Error::MeshMismatch { op: "fem::pairing" });
    }
    Ok(h.values.iter().zip(&v.values).map(|(a, b)| a * b).sum())
}
