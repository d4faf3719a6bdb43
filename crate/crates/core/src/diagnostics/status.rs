//! Physiological status from three below-LLN flags, and agreement between
//! two classifiers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Three-bit code: ratio low = 4, FEV1 low = 2, FVC low = 1.
pub fn classify_status(ratio_low: bool, fev1_low: bool, fvc_low: bool) -> u8 {
    (ratio_low as u8) << 2 | (fev1_low as u8) << 1 | fvc_low as u8
}

/// Maps each of the 8 codes to a status label. Codes sharing a label are
/// collapsed into one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusTaxonomy {
    pub labels: [String; 8],
}

impl Default for StatusTaxonomy {
    fn default() -> Self {
        let l = [
            "normal",
            "possible restriction",
            "isolated low FEV1",
            "low FEV1 and FVC",
            "obstruction",
            "obstruction with low FVC",
            "obstruction with low FEV1",
            "mixed",
        ];
        StatusTaxonomy {
            labels: l.map(String::from),
        }
    }
}

impl StatusTaxonomy {
    /// Distinct labels in order of first appearance by code.
    pub fn categories(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in &self.labels {
            if !out.contains(l) {
                out.push(l.clone());
            }
        }
        out
    }

    /// Category index of a code.
    pub fn category(&self, code: u8) -> Result<usize> {
        let label = self
            .labels
            .get(code as usize)
            .ok_or_else(|| Error::Input(format!("status code {code} out of range")))?;
        Ok(self.categories().iter().position(|c| c == label).expect("label present"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.iter().any(|l| l.trim().is_empty()) {
            return Err(Error::Input("status labels must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusTable {
    pub labels: Vec<String>,
    /// `counts[a][b]`: rows classifier A, columns classifier B.
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
    pub row_counts: Vec<u64>,
    pub col_counts: Vec<u64>,
    pub row_percent: Vec<f64>,
    pub col_percent: Vec<f64>,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    /// `None` when expected agreement is 1.
    pub kappa: Option<f64>,
}

/// Cross-tabulates two category assignments (indices into `labels`) and
/// computes Cohen's kappa.
pub fn cross_tab_and_kappa(a: &[usize], b: &[usize], labels: &[String]) -> Result<StatusTable> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("{} vs {} classifications", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Input("no classifications".into()));
    }
    let s = labels.len();
    let mut counts = vec![vec![0u64; s]; s];
    for (&i, &j) in a.iter().zip(b) {
        if i >= s || j >= s {
            return Err(Error::Input(format!("category index out of range ({i}, {j})")));
        }
        counts[i][j] += 1;
    }
    let n = a.len() as u64;
    let nf = n as f64;
    let row_counts: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
    let col_counts: Vec<u64> = (0..s).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
    let p_o = (0..s).map(|i| counts[i][i]).sum::<u64>() as f64 / nf;
    let p_e = (0..s)
        .map(|i| row_counts[i] as f64 * col_counts[i] as f64)
        .sum::<f64>()
        / (nf * nf);
    let kappa = if (1.0 - p_e).abs() < 1e-15 {
        None
    } else {
        Some((p_o - p_e) / (1.0 - p_e))
    };
    let pct = |c: &Vec<u64>| c.iter().map(|&x| 100.0 * x as f64 / nf).collect();
    Ok(StatusTable {
        labels: labels.to_vec(),
        row_percent: pct(&row_counts),
        col_percent: pct(&col_counts),
        counts,
        n,
        row_counts,
        col_counts,
        observed_agreement: p_o,
        expected_agreement: p_e,
        kappa,
    })
}
