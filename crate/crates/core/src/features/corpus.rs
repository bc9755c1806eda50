use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::audio::AudioClip;

/// Index file listing corpus members, one file name per line, in sample-id order.
pub const INDEX_FILE: &str = "index.txt";

/// Audio addressed by a stable sample id. Deliberately carries no labels.
pub trait Corpus: Sync {
    fn len(&self) -> usize;

    fn clip(&self, sample_id: usize) -> Result<AudioClip>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Default)]
pub struct MemoryCorpus {
    clips: Vec<AudioClip>,
}

impl MemoryCorpus {
    pub fn new(clips: Vec<AudioClip>) -> Self {
        Self { clips }
    }

    pub fn clips(&self) -> &[AudioClip] {
        &self.clips
    }
}

impl Corpus for MemoryCorpus {
    fn len(&self) -> usize {
        self.clips.len()
    }

    fn clip(&self, sample_id: usize) -> Result<AudioClip> {
        self.clips
            .get(sample_id)
            .cloned()
            .ok_or_else(|| Error::Corpus(format!("sample {sample_id} not in corpus of {}", self.clips.len())))
    }
}

/// Directory of mono 16-bit WAV files.
///
/// Sample ids follow `index.txt` when present, otherwise the lexicographic
/// order of the `.wav` file names.
#[derive(Debug, Clone)]
pub struct WavCorpus {
    dir: PathBuf,
    files: Vec<String>,
    sample_rate: u32,
}

impl WavCorpus {
    pub fn open(dir: impl AsRef<Path>, sample_rate: u32) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let index = dir.join(INDEX_FILE);
        let files = if index.exists() {
            fs::read_to_string(&index)
                .map_err(|e| Error::io(&index, e))?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from)
                .collect()
        } else {
            list_wavs(&dir)?
        };
        if files.is_empty() {
            return Err(Error::Corpus(format!("no audio files in {}", dir.display())));
        }
        Ok(Self {
            dir,
            files,
            sample_rate,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Writes `index.txt` pinning the current ordering.
    pub fn write_index(&self) -> Result<()> {
        let path = self.dir.join(INDEX_FILE);
        let mut text = self.files.join("\n");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

fn list_wavs(dir: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".wav") && entry.path().is_file() {
            files.push(name);
        }
    }
    files.sort();
    Ok(files)
}

impl Corpus for WavCorpus {
    fn len(&self) -> usize {
        self.files.len()
    }

    fn clip(&self, sample_id: usize) -> Result<AudioClip> {
        let name = self
            .files
            .get(sample_id)
            .ok_or_else(|| Error::Corpus(format!("sample {sample_id} not in corpus of {}", self.files.len())))?;
        AudioClip::read_wav(self.dir.join(name), self.sample_rate)
    }
}
