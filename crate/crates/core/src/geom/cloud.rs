use super::Vec3;
use crate::{Error, Result};

/// Point set with optional unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(positions: Vec<Vec3>) -> Self {
        PointCloud {
            positions,
            normals: None,
        }
    }

    pub fn with_normals(positions: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        if normals.len() != positions.len() {
            return Err(Error::invalid("normal count must match position count"));
        }
        for n in &normals {
            if (n.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::invalid("normals must have unit length"));
            }
        }
        Ok(PointCloud {
            positions,
            normals: Some(normals),
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Sub-cloud at the given indices, carrying normals along when present.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            positions: indices.iter().map(|&i| self.positions[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| indices.iter().map(|&i| ns[i]).collect()),
        }
    }

    pub fn centroid(&self) -> Vec3 {
        let mut c = Vec3::zeros();
        for p in &self.positions {
            c += p;
        }
        c / self.len().max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_unit_normals() {
        let p = vec![Vec3::zeros()];
        assert!(PointCloud::with_normals(p.clone(), vec![Vec3::new(0.5, 0.0, 0.0)]).is_err());
        assert!(PointCloud::with_normals(p, vec![Vec3::new(1.0, 0.0, 0.0)]).is_ok());
    }
}
