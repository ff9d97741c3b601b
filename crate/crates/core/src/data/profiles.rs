//! Training/validation split of demand profiles.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Training,
    Validation,
}

impl Split {
    fn as_str(self) -> &'static str {
        match self {
            Split::Training => "training",
            Split::Validation => "validation",
        }
    }
}

/// Disjoint training and validation profile ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub training: Vec<String>,
    pub validation: Vec<String>,
}

/// Seeded uniform split without replacement. Both halves keep the input
/// order.
pub fn split_profiles(ids: &[String], n_validation: usize, seed: u64) -> Result<ProfileSet> {
    if n_validation >= ids.len() && !ids.is_empty() {
        return Err(Error::config(format!(
            "cannot hold out {n_validation} of {} profiles and keep any for training",
            ids.len()
        )));
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut held = vec![false; ids.len()];
    for &i in &order[..n_validation] {
        held[i] = true;
    }
    let pick = |want: bool| {
        ids.iter()
            .zip(&held)
            .filter(|(_, &h)| h == want)
            .map(|(id, _)| id.clone())
            .collect()
    };
    Ok(ProfileSet {
        training: pick(false),
        validation: pick(true),
    })
}

impl ProfileSet {
    pub fn len(&self) -> usize {
        self.training.len() + self.validation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        if self.training.iter().any(|t| t == id) {
            Some(Split::Training)
        } else if self.validation.iter().any(|v| v == id) {
            Some(Split::Validation)
        } else {
            None
        }
    }

    /// `profile_id,split` CSV.
    pub fn to_manifest(&self) -> String {
        let mut out = String::from("profile_id,split\n");
        for (ids, split) in [(&self.training, Split::Training), (&self.validation, Split::Validation)] {
            for id in ids {
                out.push_str(&format!("{id},{}\n", split.as_str()));
            }
        }
        out
    }

    pub fn from_manifest(text: &str, origin: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut set = ProfileSet {
            training: Vec::new(),
            validation: Vec::new(),
        };
        for (i, record) in reader.records().enumerate() {
            let row = i + 2;
            let err = |message: String| Error::Load {
                path: origin.to_string(),
                row,
                message,
            };
            let record = record.map_err(|e| err(e.to_string()))?;
            if record.len() != 2 {
                return Err(err(format!("expected 2 fields, found {}", record.len())));
            }
            let id = record[0].to_string();
            if set.split_of(&id).is_some() {
                return Err(err(format!("profile {id} listed twice")));
            }
            match &record[1] {
                "training" => set.training.push(id),
                "validation" => set.validation.push(id),
                other => return Err(err(format!("unknown split '{other}'"))),
            }
        }
        Ok(set)
    }

    pub fn save_manifest(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_manifest())?;
        Ok(())
    }

    pub fn load_manifest(path: &Path) -> Result<Self> {
        Self::from_manifest(&fs::read_to_string(path)?, &path.display().to_string())
    }
}
