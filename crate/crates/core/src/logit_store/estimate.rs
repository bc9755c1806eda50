use std::fmt;
use std::str::FromStr;

use crate::logit_store::header::record_size;

/// How per-epoch teacher outputs are laid out on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageMode {
    /// All C probabilities as f32.
    NaiveF32,
    /// All C probabilities as binary16.
    DenseF16,
    /// K binary16 values, K u16 indices and a u32 seed per sample.
    TopK,
}

impl fmt::Display for StorageMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StorageMode::NaiveF32 => "naive-f32",
            StorageMode::DenseF16 => "dense-f16",
            StorageMode::TopK => "topk",
        })
    }
}

impl FromStr for StorageMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive-f32" => Ok(StorageMode::NaiveF32),
            "dense-f16" => Ok(StorageMode::DenseF16),
            "topk" => Ok(StorageMode::TopK),
            other => Err(format!("unknown storage mode '{other}'")),
        }
    }
}

/// Bytes needed for one epoch of teacher outputs, header excluded.
pub fn estimate_storage(num_samples: u64, num_classes: u64, top_k: u64, mode: StorageMode) -> u64 {
    match mode {
        StorageMode::NaiveF32 => num_samples * num_classes * 4,
        StorageMode::DenseF16 => num_samples * num_classes * 2,
        StorageMode::TopK => num_samples * record_size(top_k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_byte_counts() {
        assert_eq!(estimate_storage(21_155, 527, 20, StorageMode::NaiveF32), 44_594_740);
        assert_eq!(estimate_storage(21_155, 527, 20, StorageMode::DenseF16), 22_297_370);
        assert_eq!(estimate_storage(21_155, 527, 20, StorageMode::TopK), 1_777_020);
        assert_eq!(estimate_storage(1_904_746, 527, 20, StorageMode::TopK), 159_998_664);
    }

    #[test]
    fn mode_names_round_trip() {
        for mode in [StorageMode::NaiveF32, StorageMode::DenseF16, StorageMode::TopK] {
            assert_eq!(mode.to_string().parse::<StorageMode>().unwrap(), mode);
        }
        assert!("f8".parse::<StorageMode>().is_err());
    }
}
