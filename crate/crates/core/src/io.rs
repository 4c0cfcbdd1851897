//! JSON interchange for operators, combs, testers, collections, and ensembles.
//!
//! Matrices are stored row-major in the canonical (ascending) system order as
//! separate `real` and `imag` arrays; `imag` may be omitted for real matrices.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::comb::{validate_comb, CombEnsemble, EnsembleCollection, QuantumComb};
use crate::error::{Error, Result};
use crate::tensor::{CMatrix, HermitianOperator, System, Systems, C64};
use crate::tester::{validate_tester, QuantumTester, TesterCollection};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorJson {
    pub systems: Vec<System>,
    pub real: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imag: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombJson {
    pub slots: usize,
    pub choi: OperatorJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TesterJson {
    pub slots: usize,
    pub effects: Vec<OperatorJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectionJson {
    pub testers: Vec<TesterJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleJson {
    pub weights: Vec<f64>,
    pub combs: Vec<CombJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleCollectionJson {
    pub weights: Vec<f64>,
    pub ensembles: Vec<EnsembleJson>,
}

impl From<&HermitianOperator> for OperatorJson {
    fn from(op: &HermitianOperator) -> Self {
        let m = op.matrix();
        let rows = |f: fn(&C64) -> f64| (0..m.nrows()).map(|i| m.row(i).iter().map(f).collect()).collect::<Vec<Vec<f64>>>();
        let imag = rows(|z| z.im);
        Self {
            systems: op.systems().iter().copied().collect(),
            real: rows(|z| z.re),
            imag: imag.iter().flatten().any(|&x| x != 0.0).then_some(imag),
        }
    }
}

impl OperatorJson {
    pub fn to_operator(&self) -> Result<HermitianOperator> {
        let systems = Systems::new(self.systems.iter().copied())?;
        let d = systems.total_dim();
        let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == d && rows.iter().all(|r| r.len() == d);
        if !shape_ok(&self.real) || self.imag.as_ref().is_some_and(|im| !shape_ok(im)) {
            return Err(Error::Format(format!("matrix must be {d}x{d} for systems {:?}", systems.dims())));
        }
        let m = CMatrix::from_fn(d, d, |i, j| {
            C64::new(self.real[i][j], self.imag.as_ref().map_or(0.0, |im| im[i][j]))
        });
        HermitianOperator::new(systems, m)
    }
}

impl From<&QuantumComb> for CombJson {
    fn from(c: &QuantumComb) -> Self {
        Self {
            slots: c.slots(),
            choi: c.choi().into(),
        }
    }
}

impl CombJson {
    pub fn to_comb(&self) -> Result<QuantumComb> {
        validate_comb(&self.choi.to_operator()?, self.slots)
    }
}

impl From<&QuantumTester> for TesterJson {
    fn from(t: &QuantumTester) -> Self {
        Self {
            slots: t.slots(),
            effects: t.effects().iter().map(Into::into).collect(),
        }
    }
}

impl TesterJson {
    pub fn to_effects(&self) -> Result<Vec<HermitianOperator>> {
        self.effects.iter().map(OperatorJson::to_operator).collect()
    }

    pub fn to_tester(&self) -> Result<QuantumTester> {
        validate_tester(&self.to_effects()?, self.slots)
    }
}

impl From<&TesterCollection> for CollectionJson {
    fn from(c: &TesterCollection) -> Self {
        Self {
            testers: c.testers().iter().map(Into::into).collect(),
        }
    }
}

impl CollectionJson {
    pub fn to_collection(&self) -> Result<TesterCollection> {
        TesterCollection::new(self.testers.iter().map(TesterJson::to_tester).collect::<Result<_>>()?)
    }
}

impl From<&EnsembleCollection> for EnsembleCollectionJson {
    fn from(g: &EnsembleCollection) -> Self {
        Self {
            weights: g.weights().to_vec(),
            ensembles: g
                .ensembles()
                .iter()
                .map(|e| EnsembleJson {
                    weights: e.weights().to_vec(),
                    combs: e.combs().iter().map(Into::into).collect(),
                })
                .collect(),
        }
    }
}

impl EnsembleCollectionJson {
    pub fn to_ensembles(&self) -> Result<EnsembleCollection> {
        let ensembles = self
            .ensembles
            .iter()
            .map(|e| {
                let combs = e.combs.iter().map(CombJson::to_comb).collect::<Result<_>>()?;
                CombEnsemble::new(combs, e.weights.clone())
            })
            .collect::<Result<_>>()?;
        EnsembleCollection::new(ensembles, self.weights.clone())
    }
}

macro_rules! serialize_via {
    ($ty:ty, $json:ty) => {
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
                <$json>::from(self).serialize(serializer)
            }
        }
    };
}

serialize_via!(HermitianOperator, OperatorJson);
serialize_via!(QuantumComb, CombJson);
serialize_via!(QuantumTester, TesterJson);
serialize_via!(TesterCollection, CollectionJson);
serialize_via!(EnsembleCollection, EnsembleCollectionJson);

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn read_collection(path: &Path) -> Result<TesterCollection> {
    read_json::<CollectionJson>(path)?.to_collection()
}

pub fn read_ensembles(path: &Path) -> Result<EnsembleCollection> {
    read_json::<EnsembleCollectionJson>(path)?.to_ensembles()
}
