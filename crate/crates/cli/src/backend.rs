use std::path::Path;

use storecost::lm_client::LmClient;
use storecost::storage::{ExactPotential, IndependenceEstimator, PotentialSource};
use storecost::verify::BundledJoint;
use storecost::{Error, ExactJointModel, MaskedNgramModel, ProbabilityModel};

use crate::config::{BackendChoice, BUNDLED_PREFIX};
use crate::manifest::{read_input, Manifest};

pub enum Backend {
    Exact(ExactJointModel),
    Ngram(MaskedNgramModel),
    Server(LmClient),
}

/// Tab-separated lines are a probability table; anything else is a list of
/// sequences whose empirical distribution becomes the joint.
fn parse_joint(text: &str) -> Result<ExactJointModel, Error> {
    let is_table = text
        .lines()
        .any(|l| !l.starts_with('#') && l.contains('\t'));
    Ok(if is_table {
        ExactJointModel::parse_table(text)?
    } else {
        ExactJointModel::parse_sequences(text)?
    })
}

impl Backend {
    pub fn build(choice: &BackendChoice, manifest: &mut Manifest) -> Result<Self, Error> {
        match choice {
            BackendChoice::Exact { joint } => {
                if let Some(name) = joint.strip_prefix(BUNDLED_PREFIX) {
                    let bundled = BundledJoint::by_name(name)
                        .ok_or_else(|| Error::Usage(format!("no bundled joint named {name:?}")))?;
                    return Ok(Backend::Exact(bundled.model()));
                }
                let text = read_input(manifest, Path::new(joint))?;
                Ok(Backend::Exact(parse_joint(&text)?))
            }
            BackendChoice::Ngram {
                corpus,
                order,
                alpha,
            } => {
                let text = read_input(manifest, corpus)?;
                Ok(Backend::Ngram(MaskedNgramModel::fit_text(
                    &text, *order, *alpha,
                )?))
            }
            BackendChoice::Server(config) => {
                Ok(Backend::Server(LmClient::connect(config.clone())?))
            }
        }
    }

    pub fn model(&self) -> &dyn ProbabilityModel {
        match self {
            Backend::Exact(m) => m,
            Backend::Ngram(m) => m,
            Backend::Server(c) => c,
        }
    }

    /// Exact KL on a joint table; the independence estimator elsewhere.
    pub fn potential_source(&self) -> Box<dyn PotentialSource + '_> {
        match self {
            Backend::Exact(m) => Box::new(ExactPotential::new(m)),
            other => Box::new(IndependenceEstimator::new(other.model())),
        }
    }
}
