use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Hypercube,
    Sphere,
}

impl Domain {
    pub fn name(&self) -> &'static str {
        match self {
            Domain::Hypercube => "cube",
            Domain::Sphere => "sphere",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cube" | "hypercube" => Ok(Domain::Hypercube),
            "sphere" => Ok(Domain::Sphere),
            other => Err(Error::InvalidInput(format!("unknown domain `{other}`"))),
        }
    }
}

/// One or more equal-length vectors living on the hypercube or the sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    domain: Domain,
    groups: Vec<Vec<f64>>,
}

impl Assignment {
    pub fn new(domain: Domain, groups: Vec<Vec<f64>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidAssignment("no variable groups".into()));
        }
        let n = groups[0].len();
        for g in &groups {
            if g.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: g.len() });
            }
            match domain {
                Domain::Hypercube => {
                    if g.iter().any(|&v| v != 1.0 && v != -1.0) {
                        return Err(Error::InvalidAssignment("hypercube entries must be +-1".into()));
                    }
                }
                Domain::Sphere => {
                    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if (norm - 1.0).abs() > 1e-9 {
                        return Err(Error::InvalidAssignment(format!("sphere group has norm {norm}")));
                    }
                }
            }
        }
        Ok(Self { domain, groups })
    }

    pub fn hypercube(groups: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(Domain::Hypercube, groups)
    }

    pub fn sphere(groups: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(Domain::Sphere, groups)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn groups(&self) -> &[Vec<f64>] {
        &self.groups
    }

    pub fn group(&self, i: usize) -> &[f64] {
        &self.groups[i]
    }

    pub fn dim(&self) -> usize {
        self.groups[0].len()
    }

    pub fn into_groups(self) -> Vec<Vec<f64>> {
        self.groups
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_domains() {
        assert!(Assignment::hypercube(vec![vec![1.0, -1.0]]).is_ok());
        assert!(Assignment::hypercube(vec![vec![1.0, 0.5]]).is_err());
        let s = 0.5f64.sqrt();
        assert!(Assignment::sphere(vec![vec![s, s], vec![1.0, 0.0]]).is_ok());
        assert!(Assignment::sphere(vec![vec![1.0, 1.0]]).is_err());
        assert!(Assignment::hypercube(vec![vec![1.0], vec![1.0, 1.0]]).is_err());
    }
}
