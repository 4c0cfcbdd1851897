use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{System, Systems};

/// Whether a signature describes a comb or the tester space that measures it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Comb,
    Tester,
}

/// Dimensions of the consecutive systems `0..k`, with even labels as inputs
/// and odd labels as outputs.
///
/// An `n`-slot comb owns `2n + 2` systems; an `n`-slot tester owns `2n`
/// systems and measures `(n - 1)`-slot combs on the same systems.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CombSignature {
    dims: Vec<usize>,
    role: Role,
}

impl CombSignature {
    pub fn new(dims: Vec<usize>, role: Role) -> Result<Self> {
        if dims.len() < 2 || !dims.len().is_multiple_of(2) {
            return Err(Error::SignatureMismatch(format!(
                "a {role:?} signature needs an even, nonzero number of systems, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::SignatureMismatch("system dimension 0".into()));
        }
        Ok(Self { dims, role })
    }

    pub fn comb(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims, Role::Comb)
    }

    pub fn tester(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims, Role::Tester)
    }

    /// Reads a signature off an operator's systems, which must be `0..k`.
    pub fn from_systems(systems: &Systems, role: Role) -> Result<Self> {
        for (expect, s) in systems.iter().enumerate() {
            if s.index != expect {
                return Err(Error::SignatureMismatch(format!(
                    "systems must be labeled 0..{}, found index {}",
                    systems.len(),
                    s.index
                )));
            }
        }
        Self::new(systems.dims(), role)
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, index: usize) -> usize {
        self.dims[index]
    }

    pub fn num_systems(&self) -> usize {
        self.dims.len()
    }

    pub fn slots(&self) -> usize {
        match self.role {
            Role::Comb => self.dims.len() / 2 - 1,
            Role::Tester => self.dims.len() / 2,
        }
    }

    pub fn systems(&self) -> Systems {
        Systems::new(self.dims.iter().enumerate().map(|(i, &d)| System::new(i, d)))
            .expect("consecutive labels are unique")
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Product of the even-labeled (input) dimensions.
    pub fn input_product(&self) -> usize {
        self.dims.iter().step_by(2).product()
    }

    /// Product of the odd-labeled (output) dimensions, written `D` in the docs.
    pub fn output_product(&self) -> usize {
        self.dims.iter().skip(1).step_by(2).product()
    }

    /// All inputs have dimension 1, so combs reduce to states and testers to POVMs.
    pub fn is_probe_trivial(&self) -> bool {
        self.dims.iter().step_by(2).all(|&d| d == 1)
    }

    /// The same systems seen from the other side of the comb/tester pairing.
    pub fn dual(&self) -> Self {
        let role = match self.role {
            Role::Comb => Role::Tester,
            Role::Tester => Role::Comb,
        };
        Self {
            dims: self.dims.clone(),
            role,
        }
    }
}
