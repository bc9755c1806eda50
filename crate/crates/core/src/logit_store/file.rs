use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::logit_store::header::{StoreHeader, HEADER_SIZE};
use crate::logit_store::record::LogitRecord;

/// Companion file marking which slots have been written.
pub fn bitmap_path(store: &Path) -> PathBuf {
    side_path(store, "written")
}

pub(crate) fn side_path(store: &Path, suffix: &str) -> PathBuf {
    let mut name = store.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

fn bitmap_len(header: &StoreHeader) -> usize {
    header.num_slots().div_ceil(8) as usize
}

#[cfg(unix)]
fn write_at(file: &File, buf: &[u8], offset: u64) -> std::io::Result<()> {
    std::os::unix::fs::FileExt::write_all_at(file, buf, offset)
}

#[cfg(unix)]
fn read_at(file: &File, buf: &mut [u8], offset: u64) -> std::io::Result<()> {
    std::os::unix::fs::FileExt::read_exact_at(file, buf, offset)
}

#[cfg(windows)]
fn write_at(file: &File, mut buf: &[u8], mut offset: u64) -> std::io::Result<()> {
    use std::os::windows::fs::FileExt;
    while !buf.is_empty() {
        let n = file.seek_write(buf, offset)?;
        buf = &buf[n..];
        offset += n as u64;
    }
    Ok(())
}

#[cfg(windows)]
fn read_at(file: &File, mut buf: &mut [u8], mut offset: u64) -> std::io::Result<()> {
    use std::os::windows::fs::FileExt;
    while !buf.is_empty() {
        let n = file.seek_read(buf, offset)?;
        if n == 0 {
            return Err(std::io::ErrorKind::UnexpectedEof.into());
        }
        buf = &mut buf[n..];
        offset += n as u64;
    }
    Ok(())
}

/// Single-writer handle used during logit extraction.
///
/// The record region is pre-sized on creation; records may be written in any
/// order. [`StoreWriter::finish`] persists the written-slot bitmap.
#[derive(Debug)]
pub struct StoreWriter {
    path: PathBuf,
    file: File,
    header: StoreHeader,
    written: Vec<u8>,
    buf: Vec<u8>,
}

impl StoreWriter {
    pub fn create(path: impl AsRef<Path>, header: StoreHeader) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        header.validate()?;
        let size = header
            .file_size()
            .ok_or_else(|| Error::InvalidHeader("store size overflows u64".into()))?;
        let file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        file.set_len(size).map_err(|e| Error::io(&path, e))?;
        write_at(&file, &header.to_bytes(), 0).map_err(|e| Error::io(&path, e))?;
        let written = vec![0u8; bitmap_len(&header)];
        let bitmap = bitmap_path(&path);
        fs::write(&bitmap, &written).map_err(|e| Error::io(&bitmap, e))?;
        Ok(Self {
            path,
            file,
            header,
            written,
            buf: Vec::new(),
        })
    }

    pub fn header(&self) -> &StoreHeader {
        &self.header
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append_record(&mut self, sample: u64, epoch: u16, record: &LogitRecord) -> Result<()> {
        let slot = self.header.slot(sample, epoch)?;
        record.validate(self.header.top_k as usize, self.header.num_classes as usize)?;
        self.buf.clear();
        record.encode_into(&mut self.buf);
        let offset = HEADER_SIZE + slot * self.header.record_size();
        write_at(&self.file, &self.buf, offset).map_err(|e| Error::io(&self.path, e))?;
        self.written[(slot / 8) as usize] |= 1 << (slot % 8);
        Ok(())
    }

    /// Flushes records and the written-slot bitmap. The store is immutable afterwards.
    pub fn finish(self) -> Result<()> {
        self.file.sync_all().map_err(|e| Error::io(&self.path, e))?;
        let bitmap = bitmap_path(&self.path);
        fs::write(&bitmap, &self.written).map_err(|e| Error::io(&bitmap, e))?;
        Ok(())
    }
}

/// Read-only store handle. Reads are positional, so a reader can be shared
/// between threads.
#[derive(Debug)]
pub struct StoreReader {
    path: PathBuf,
    file: File,
    header: StoreHeader,
    written: Option<Vec<u8>>,
}

impl StoreReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let len = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        let mut head = [0u8; HEADER_SIZE as usize];
        if len < HEADER_SIZE {
            return Err(Error::CorruptStore(format!(
                "{} is {len} bytes, shorter than the header",
                path.display()
            )));
        }
        read_at(&file, &mut head, 0).map_err(|e| Error::io(&path, e))?;
        let header = StoreHeader::from_bytes(&head)?;
        let expected = header.file_size().unwrap();
        if len != expected {
            return Err(Error::CorruptStore(format!(
                "{} is {len} bytes, header implies {expected}",
                path.display()
            )));
        }
        let bitmap = bitmap_path(&path);
        let written = match fs::read(&bitmap) {
            Ok(bytes) if bytes.len() == bitmap_len(&header) => Some(bytes),
            Ok(bytes) => {
                return Err(Error::CorruptStore(format!(
                    "{} is {} bytes, expected {}",
                    bitmap.display(),
                    bytes.len(),
                    bitmap_len(&header)
                )))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(Error::io(&bitmap, e)),
        };
        Ok(Self {
            path,
            file,
            header,
            written,
        })
    }

    pub fn header(&self) -> &StoreHeader {
        &self.header
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// `None` when no bitmap is available.
    pub fn is_written(&self, sample: u64, epoch: u16) -> Result<Option<bool>> {
        let slot = self.header.slot(sample, epoch)?;
        Ok(self
            .written
            .as_ref()
            .map(|bits| bits[(slot / 8) as usize] & (1 << (slot % 8)) != 0))
    }

    pub fn read_raw(&self, sample: u64, epoch: u16) -> Result<Vec<u8>> {
        let offset = self.header.record_offset(sample, epoch)?;
        let mut buf = vec![0u8; self.header.record_size() as usize];
        read_at(&self.file, &mut buf, offset).map_err(|e| Error::io(&self.path, e))?;
        Ok(buf)
    }

    pub fn read_record(&self, sample: u64, epoch: u16) -> Result<LogitRecord> {
        if self.is_written(sample, epoch)? == Some(false) {
            return Err(Error::MissingRecord { sample, epoch });
        }
        let raw = self.read_raw(sample, epoch)?;
        let k = self.header.top_k as usize;
        // all-zero slot: index 0 repeated K times, only legal when K == 1
        if k > 1 && raw.iter().all(|&b| b == 0) {
            return Err(Error::MissingRecord { sample, epoch });
        }
        let record = LogitRecord::decode(&raw, k)?;
        record
            .validate_decoded(k, self.header.num_classes as usize)
            .map_err(|e| Error::CorruptStore(format!("sample {sample}, epoch {epoch}: {e}")))?;
        Ok(record)
    }

    /// All records of one stored epoch, in sample order.
    pub fn read_epoch(&self, epoch: u16) -> Result<Vec<LogitRecord>> {
        (0..self.header.num_samples)
            .map(|s| self.read_record(s, epoch))
            .collect()
    }
}
