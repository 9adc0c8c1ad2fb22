//! Hyperparameters for the external LoRA fine-tuning stage.

use alloc::string::String;

use serde::{Deserialize, Serialize};

/// Fine-tuning settings handed to an external training stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub schema: String,
    pub learning_rate: f64,
    pub lr_scheduler: String,
    pub num_train_epochs: u32,
    pub max_length: u32,
    pub per_device_train_batch_size: u32,
    pub gradient_accumulation_steps: u32,
    pub adapter_method: String,
    /// Not fixed by the reference setup; 16 is this project's default.
    pub lora_rank: u32,
}

pub const FINETUNE_SCHEMA: &str = "geoicl.finetune.v1";

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            schema: FINETUNE_SCHEMA.into(),
            learning_rate: 2e-4,
            lr_scheduler: "cosine".into(),
            num_train_epochs: 5,
            max_length: 2048,
            per_device_train_batch_size: 4,
            gradient_accumulation_steps: 4,
            adapter_method: "lora".into(),
            lora_rank: 16,
        }
    }
}
