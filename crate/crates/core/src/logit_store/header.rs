use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CEDS";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_SIZE: u64 = 24;
/// Class indices are stored as u16.
pub const MAX_CLASSES: u32 = 1 << 16;

/// Fixed 24-byte store header.
///
/// Layout (little-endian): magic `CEDS`, u16 version, u16 reserved (0),
/// u64 N, u32 C, u16 K, u16 E.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreHeader {
    pub format_version: u16,
    pub num_samples: u64,
    pub num_classes: u32,
    pub top_k: u16,
    pub num_epochs: u16,
}

impl StoreHeader {
    pub fn new(num_samples: u64, num_classes: u32, top_k: u16, num_epochs: u16) -> Result<Self> {
        let header = Self {
            format_version: FORMAT_VERSION,
            num_samples,
            num_classes,
            top_k,
            num_epochs,
        };
        header.validate()?;
        Ok(header)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::InvalidHeader(format!(
                "unsupported format version {}",
                self.format_version
            )));
        }
        if self.num_classes == 0 || self.num_classes > MAX_CLASSES {
            return Err(Error::InvalidHeader(format!(
                "class count {} outside [1, {MAX_CLASSES}]",
                self.num_classes
            )));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidHeader("top-k must be at least 1".into()));
        }
        if self.top_k as u32 > self.num_classes {
            return Err(Error::TopKTooLarge {
                k: self.top_k as usize,
                classes: self.num_classes as usize,
            });
        }
        if self.num_samples == 0 {
            return Err(Error::InvalidHeader("store must hold at least one sample".into()));
        }
        if self.num_epochs == 0 {
            return Err(Error::InvalidHeader("store must hold at least one epoch".into()));
        }
        if self.file_size().is_none() {
            return Err(Error::InvalidHeader("store size overflows u64".into()));
        }
        Ok(())
    }

    /// Bytes per record: K binary16 values, K u16 indices and a u32 seed.
    pub fn record_size(&self) -> u64 {
        record_size(self.top_k as u64)
    }

    pub fn num_slots(&self) -> u64 {
        self.num_samples * self.num_epochs as u64
    }

    /// Header plus the full record region, or `None` on overflow.
    pub fn file_size(&self) -> Option<u64> {
        self.num_samples
            .checked_mul(self.num_epochs as u64)?
            .checked_mul(self.record_size())?
            .checked_add(HEADER_SIZE)
    }

    /// Slot index in epoch-major, sample-minor order.
    pub fn slot(&self, sample: u64, epoch: u16) -> Result<u64> {
        if sample >= self.num_samples || epoch >= self.num_epochs {
            return Err(Error::OutOfRange {
                sample,
                epoch,
                num_samples: self.num_samples,
                num_epochs: self.num_epochs,
            });
        }
        Ok(epoch as u64 * self.num_samples + sample)
    }

    pub fn record_offset(&self, sample: u64, epoch: u16) -> Result<u64> {
        Ok(HEADER_SIZE + self.slot(sample, epoch)? * self.record_size())
    }

    pub fn to_bytes(&self) -> [u8; HEADER_SIZE as usize] {
        let mut out = [0u8; HEADER_SIZE as usize];
        out[0..4].copy_from_slice(&MAGIC);
        out[4..6].copy_from_slice(&self.format_version.to_le_bytes());
        // bytes 6..8 reserved, zero
        out[8..16].copy_from_slice(&self.num_samples.to_le_bytes());
        out[16..20].copy_from_slice(&self.num_classes.to_le_bytes());
        out[20..22].copy_from_slice(&self.top_k.to_le_bytes());
        out[22..24].copy_from_slice(&self.num_epochs.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_SIZE as usize {
            return Err(Error::CorruptStore(format!(
                "header truncated: {} of {HEADER_SIZE} bytes",
                bytes.len()
            )));
        }
        if bytes[0..4] != MAGIC {
            return Err(Error::CorruptStore(format!("bad magic {:02x?}", &bytes[0..4])));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let reserved = u16_at(6);
        if reserved != 0 {
            return Err(Error::CorruptStore(format!("reserved field is {reserved}, expected 0")));
        }
        let header = Self {
            format_version: u16_at(4),
            num_samples: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
            num_classes: u32::from_le_bytes(bytes[16..20].try_into().unwrap()),
            top_k: u16_at(20),
            num_epochs: u16_at(22),
        };
        header
            .validate()
            .map_err(|e| Error::CorruptStore(e.to_string()))?;
        Ok(header)
    }
}

pub fn record_size(top_k: u64) -> u64 {
    4 * top_k + 4
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_bytes_layout() {
        let h = StoreHeader::new(4, 10, 3, 2).unwrap();
        let b = h.to_bytes();
        assert_eq!(
            b,
            [
                0x43, 0x45, 0x44, 0x53, 1, 0, 0, 0, 4, 0, 0, 0, 0, 0, 0, 0, 10, 0, 0, 0, 3, 0, 2, 0
            ]
        );
        assert_eq!(StoreHeader::from_bytes(&b).unwrap(), h);
    }

    #[test]
    fn record_size_matches_paper_default() {
        assert_eq!(record_size(20), 84);
        assert_eq!(record_size(3), 16);
        assert_eq!(StoreHeader::new(4, 10, 3, 2).unwrap().file_size(), Some(152));
    }

    #[test]
    fn rejects_bad_headers() {
        assert!(matches!(
            StoreHeader::new(1, 5, 6, 1),
            Err(Error::TopKTooLarge { k: 6, classes: 5 })
        ));
        assert!(StoreHeader::new(1, MAX_CLASSES + 1, 1, 1).is_err());
        assert!(StoreHeader::new(1, MAX_CLASSES, 1, 1).is_ok());
        assert!(StoreHeader::new(0, 5, 1, 1).is_err());
        assert!(StoreHeader::new(1, 5, 1, 0).is_err());
        assert!(StoreHeader::new(1, 5, 0, 1).is_err());
    }

    #[test]
    fn slot_bounds() {
        let h = StoreHeader::new(4, 10, 3, 2).unwrap();
        assert_eq!(h.record_offset(0, 0).unwrap(), 24);
        assert_eq!(h.record_offset(1, 1).unwrap(), 24 + 5 * 16);
        assert!(matches!(h.slot(4, 0), Err(Error::OutOfRange { .. })));
        assert!(matches!(h.slot(0, 2), Err(Error::OutOfRange { .. })));
    }
}
