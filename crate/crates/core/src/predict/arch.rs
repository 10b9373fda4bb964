use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::{MODEL_INPUT_HEIGHT, MODEL_INPUT_WIDTH};

/// Layer layout of the quality regressor.
///
/// Each block is a 3x3 convolution (stride 1, zero padding 1), ReLU and a
/// 2x2 max pool with stride 2. The blocks feed a global average pool and one
/// linear output neuron.
///
/// With `standardize_input` each input is shifted and scaled to zero mean and
/// unit variance before the first block, so the network sees edge structure
/// independent of ink and background intensity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchDescriptor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub blocks: Vec<usize>,
    #[serde(default)]
    pub standardize_input: bool,
}

/// Position of one conv block's tensors inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvLayout {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Spatial size of the block input.
    pub height: usize,
    pub width: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl ConvLayout {
    pub fn fan_in(&self) -> usize {
        self.in_channels * 9
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.fan_in()
    }

    pub fn pooled_height(&self) -> usize {
        self.height / 2
    }

    pub fn pooled_width(&self) -> usize {
        self.width / 2
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub convs: Vec<ConvLayout>,
    pub head_weight_offset: usize,
    pub head_bias_offset: usize,
    pub total: usize,
}

impl Default for ArchDescriptor {
    fn default() -> Self {
        ArchDescriptor {
            channels: 1,
            height: MODEL_INPUT_HEIGHT,
            width: MODEL_INPUT_WIDTH,
            blocks: vec![16, 32, 64],
            standardize_input: true,
        }
    }
}

impl ArchDescriptor {
    /// A raw-input architecture; see [`Self::with_standardized_input`].
    pub fn new(channels: usize, height: usize, width: usize, blocks: Vec<usize>) -> Result<Self> {
        let arch = ArchDescriptor {
            channels,
            height,
            width,
            blocks,
            standardize_input: false,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn with_standardized_input(mut self, on: bool) -> Self {
        self.standardize_input = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::param("architecture input dimensions must be positive"));
        }
        if self.blocks.is_empty() || self.blocks.contains(&0) {
            return Err(Error::param(
                "architecture needs at least one block with positive width",
            ));
        }
        let (mut h, mut w) = (self.height, self.width);
        for (i, _) in self.blocks.iter().enumerate() {
            if h < 2 || w < 2 {
                return Err(Error::param(format!(
                    "input {}x{} is too small for {} pooling blocks (block {i} sees {h}x{w})",
                    self.height,
                    self.width,
                    self.blocks.len()
                )));
            }
            h /= 2;
            w /= 2;
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn layout(&self) -> ParamLayout {
        let mut convs = Vec::with_capacity(self.blocks.len());
        let (mut c, mut h, mut w) = (self.channels, self.height, self.width);
        let mut off = 0;
        for &out in &self.blocks {
            let weight_offset = off;
            off += out * c * 9;
            let bias_offset = off;
            off += out;
            convs.push(ConvLayout {
                in_channels: c,
                out_channels: out,
                height: h,
                width: w,
                weight_offset,
                bias_offset,
            });
            c = out;
            h /= 2;
            w /= 2;
        }
        let head_weight_offset = off;
        off += c;
        ParamLayout {
            convs,
            head_weight_offset,
            head_bias_offset: off,
            total: off + 1,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }

    /// Channels reaching the global average pool.
    pub fn feature_len(&self) -> usize {
        *self.blocks.last().expect("validated architecture has blocks")
    }
}
