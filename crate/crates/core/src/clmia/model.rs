use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{build_feature, Standardizer};
use crate::nn::{read_network, softmax, write_network, Network};

/// Default decision threshold on the member-class probability.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipDecision {
    pub member: bool,
    /// Member-class probability (or the attack's member score).
    pub score: f64,
}

impl MembershipDecision {
    pub fn from_score(score: f64, threshold: f64) -> Self {
        MembershipDecision {
            member: score >= threshold,
            score,
        }
    }
}

/// Encoder `f`, training-only projection head `g` and the fine-tuned
/// classification head.
///
/// An attack model without an encoder is the Only-FC control: the head reads
/// the feature vector directly.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackModel {
    pub n_classes: usize,
    pub encoder: Option<Network>,
    pub projection: Option<Network>,
    pub head: Option<Network>,
    pub standardizer: Option<Standardizer>,
    pub encoder_frozen: bool,
    pub threshold: f64,
    pub contrastive_history: Vec<f64>,
    pub finetune_history: Vec<f64>,
}

impl AttackModel {
    /// Head-only model reading the raw feature vector.
    pub fn only_fc(n_classes: usize) -> Self {
        AttackModel {
            n_classes,
            encoder: None,
            projection: None,
            head: None,
            standardizer: None,
            encoder_frozen: true,
            threshold: DEFAULT_THRESHOLD,
            contrastive_history: Vec::new(),
            finetune_history: Vec::new(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.n_classes + 2
    }

    pub fn embedding_dim(&self) -> usize {
        self.encoder
            .as_ref()
            .map_or(self.feature_dim(), Network::output_dim)
    }

    /// Encoder output for a feature vector, dropout off.
    pub fn embed(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.feature_dim() {
            return Err(Error::shape("attack features", self.feature_dim(), features.len()));
        }
        let x = match &self.standardizer {
            Some(s) => s.apply(features),
            None => features.to_vec(),
        };
        match &self.encoder {
            Some(enc) => enc.predict(&x),
            None => Ok(x),
        }
    }

    /// Member-class probability for a clean posterior.
    pub fn score(&self, posterior: &[f64]) -> Result<f64> {
        let head = self
            .head
            .as_ref()
            .ok_or_else(|| Error::State("attack model has not been fine-tuned".into()))?;
        let features = build_feature(posterior)?;
        let logits = head.predict(&self.embed(features.values())?)?;
        Ok(softmax(&logits)[1])
    }

    pub fn infer_membership(&self, posterior: &[f64]) -> Result<MembershipDecision> {
        Ok(MembershipDecision::from_score(self.score(posterior)?, self.threshold))
    }

    /// Decisions for many posteriors, evaluated in parallel, order preserved.
    pub fn infer_all(&self, posteriors: &[Vec<f64>]) -> Result<Vec<MembershipDecision>> {
        posteriors
            .par_iter()
            .map(|p| self.infer_membership(p))
            .collect()
    }

    pub fn encoder_fingerprint(&self) -> Option<String> {
        self.encoder.as_ref().map(Network::fingerprint)
    }
}

/// Attack-model container.
///
/// ```text
/// bytes 0..8   magic "MIAATK01"
/// u32 LE       manifest length M
/// M bytes      JSON manifest: {n_classes, parts, standardizer, ...}
/// per part     one network container (see nn checkpoint), in manifest order
/// ```
pub const ATTACK_MAGIC: &[u8; 8] = b"MIAATK01";

#[derive(Serialize, Deserialize)]
struct Manifest {
    n_classes: usize,
    parts: Vec<String>,
    standardizer: Option<Standardizer>,
    encoder_frozen: bool,
    threshold: f64,
    contrastive_history: Vec<f64>,
    finetune_history: Vec<f64>,
}

fn ck(e: impl std::fmt::Display) -> Error {
    Error::Checkpoint(e.to_string())
}

pub fn write_attack_model<W: Write>(model: &AttackModel, mut w: W) -> Result<()> {
    let named = [
        ("encoder", &model.encoder),
        ("projection", &model.projection),
        ("head", &model.head),
    ];
    let parts: Vec<String> = named
        .iter()
        .filter(|(_, n)| n.is_some())
        .map(|(name, _)| name.to_string())
        .collect();
    let manifest = Manifest {
        n_classes: model.n_classes,
        parts,
        standardizer: model.standardizer.clone(),
        encoder_frozen: model.encoder_frozen,
        threshold: model.threshold,
        contrastive_history: model.contrastive_history.clone(),
        finetune_history: model.finetune_history.clone(),
    };
    let bytes = serde_json::to_vec(&manifest).map_err(ck)?;
    w.write_all(ATTACK_MAGIC).map_err(ck)?;
    w.write_all(&(bytes.len() as u32).to_le_bytes()).map_err(ck)?;
    w.write_all(&bytes).map_err(ck)?;
    for (_, net) in named {
        if let Some(net) = net {
            write_network(net, &mut w)?;
        }
    }
    Ok(())
}

pub fn read_attack_model<R: Read>(mut r: R) -> Result<AttackModel> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(ck)?;
    if &magic != ATTACK_MAGIC {
        return Err(ck("not an attack-model container (bad magic)"));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len).map_err(ck)?;
    let mut bytes = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut bytes).map_err(ck)?;
    let manifest: Manifest = serde_json::from_slice(&bytes).map_err(ck)?;
    let mut model = AttackModel {
        n_classes: manifest.n_classes,
        encoder: None,
        projection: None,
        head: None,
        standardizer: manifest.standardizer,
        encoder_frozen: manifest.encoder_frozen,
        threshold: manifest.threshold,
        contrastive_history: manifest.contrastive_history,
        finetune_history: manifest.finetune_history,
    };
    for part in &manifest.parts {
        let net = read_network(&mut r)?;
        match part.as_str() {
            "encoder" => model.encoder = Some(net),
            "projection" => model.projection = Some(net),
            "head" => model.head = Some(net),
            other => return Err(ck(format!("unknown part `{other}`"))),
        }
    }
    Ok(model)
}

pub fn save_attack_model(model: &AttackModel, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_attack_model(model, &mut buf)?;
    crate::io::write_atomic(path, &buf)
}

pub fn load_attack_model(path: &Path) -> Result<AttackModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_attack_model(bytes.as_slice())
}
