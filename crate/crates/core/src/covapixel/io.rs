//! `covapix-1` text documents (JSON). Covariances are stored as their packed
//! lower Cholesky factor; readers rebuild `C = L·Lᵀ`.

use serde::{Deserialize, Serialize};

use super::{Covapixel, CovapixelError, CovapixelSet, FeatureSpace};
use crate::fusion::Estimate;
use crate::matstat::{cholesky, CholFactor, JitterPolicy};
use crate::Scalar;

pub const FORMAT_VERSION: &str = "covapix-1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    version: String,
    features: String,
    eps: f64,
    width: usize,
    height: usize,
    covapixels: Vec<Record>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: u32,
    n: usize,
    mu: Vec<f64>,
    chol_lower: Vec<f64>,
}

fn format_err(msg: impl Into<String>) -> CovapixelError {
    CovapixelError::Format(msg.into())
}

pub fn write_covapix<T: Scalar>(set: &CovapixelSet<T>) -> Result<String, CovapixelError> {
    let covapixels = set
        .covapixels
        .iter()
        .map(|c| {
            // exact semidefinite factor when possible, jittered otherwise
            let l = cholesky(&c.est.cov, JitterPolicy::None)
                .or_else(|_| cholesky(&c.est.cov, JitterPolicy::Auto))
                .map_err(|e| format_err(format!("covapixel {}: {e}", c.id)))?;
            Ok(Record {
                id: c.id,
                n: c.n,
                mu: c.est.mu.iter().map(|v| v.to_f64_lossy()).collect(),
                chol_lower: l.as_lower().iter().map(|v| v.to_f64_lossy()).collect(),
            })
        })
        .collect::<Result<Vec<_>, CovapixelError>>()?;
    let doc = Document {
        version: FORMAT_VERSION.to_string(),
        features: set.feature_space.name().to_string(),
        eps: set.eps.to_f64_lossy(),
        width: set.width,
        height: set.height,
        covapixels,
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| format_err(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn read_covapix<T: Scalar>(text: &str) -> Result<CovapixelSet<T>, CovapixelError> {
    let doc: Document = serde_json::from_str(text).map_err(|e| format_err(e.to_string()))?;
    if doc.version != FORMAT_VERSION {
        return Err(format_err(format!("unsupported version {:?}", doc.version)));
    }
    let fs: FeatureSpace = doc.features.parse()?;
    let k = fs.k();
    let covapixels = doc
        .covapixels
        .into_iter()
        .map(|r| {
            if r.mu.len() != k {
                return Err(format_err(format!(
                    "covapixel {}: mu has {} entries, expected {k}",
                    r.id,
                    r.mu.len()
                )));
            }
            if r.n == 0 {
                return Err(format_err(format!("covapixel {}: zero pixel count", r.id)));
            }
            let lower = r.chol_lower.iter().map(|&v| T::lit(v)).collect();
            let l = CholFactor::from_lower(k, lower)
                .map_err(|e| format_err(format!("covapixel {}: {e}", r.id)))?;
            let est = Estimate::new(r.mu.iter().map(|&v| T::lit(v)).collect(), l.reconstruct())
                .map_err(|e| format_err(format!("covapixel {}: {e}", r.id)))?;
            Ok(Covapixel {
                id: r.id,
                n: r.n,
                est,
                feature_space: fs,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CovapixelSet {
        feature_space: fs,
        eps: T::lit(doc.eps),
        width: doc.width,
        height: doc.height,
        covapixels,
    })
}
