//! Versioned parameter file: layer shapes, weights, decays, thresholds, the
//! quantization flag and the input normalization, as JSON.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::NetworkParams;
use crate::domain::NormalizationSpec;
use crate::error::{Error, Result};

pub const FORMAT_TAG: &str = "neuro-attitude/snn-params/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    /// Evaluate on the hardware grid. Stored parameters are the
    /// full-resolution masters either way.
    pub quantized: bool,
    pub normalization: NormalizationSpec,
    pub n_enc: usize,
    pub n_hid: usize,
    pub params: NetworkParams,
}

impl Checkpoint {
    pub fn new(params: NetworkParams, normalization: NormalizationSpec, quantized: bool) -> Self {
        Self {
            format: FORMAT_TAG.to_string(),
            quantized,
            normalization,
            n_enc: params.n_enc(),
            n_hid: params.n_hid(),
            params,
        }
    }

    /// Parameters to run: grid-snapped if the checkpoint is quantized.
    pub fn runtime_params(&self) -> NetworkParams {
        if self.quantized {
            self.params.quantized()
        } else {
            self.params.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != FORMAT_TAG {
            return Err(Error::Format(format!(
                "expected format `{FORMAT_TAG}`, found `{}`",
                self.format
            )));
        }
        if self.n_enc != self.params.n_enc() || self.n_hid != self.params.n_hid() {
            return Err(Error::Format("declared layer sizes disagree with parameters".into()));
        }
        self.params
            .validate()
            .map_err(|e| Error::Format(format!("invalid parameters: {e}")))?;
        NormalizationSpec::new(self.normalization.x_min, self.normalization.x_max)
            .map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_reader(input)
            .map_err(|e| Error::Format(format!("cannot parse parameter file: {e}")))?;
        ck.validate()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}
