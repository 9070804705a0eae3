use std::fs;
use std::path::Path;

use crate::audio::{read_wav, AudioBuffer};
use crate::dynamics::{stem_sum_error, STEM_SUM_TOLERANCE};
use crate::error::{Error, Result};

/// Stem roles, in the order stems are stored.
pub const STEM_ROLES: [&str; 4] = ["vocals", "bass", "drums", "other"];

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub name: String,
    /// One buffer per entry of [`STEM_ROLES`].
    pub stems: Vec<AudioBuffer>,
    pub mixture: Option<AudioBuffer>,
}

impl Track {
    pub fn len(&self) -> usize {
        self.stems[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Tracks of four stems sharing one sample rate and channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct StemPool {
    tracks: Vec<Track>,
}

impl StemPool {
    pub fn new(tracks: Vec<Track>) -> Result<Self> {
        let first = tracks
            .first()
            .ok_or_else(|| Error::Build("stem pool has no tracks".into()))?;
        let (rate, channels) = (first.stems[0].sample_rate(), first.stems[0].channels());
        for t in &tracks {
            if t.stems.len() != STEM_ROLES.len() {
                return Err(Error::Build(format!("track {} has {} stems", t.name, t.stems.len())));
            }
            for (role, s) in STEM_ROLES.iter().zip(&t.stems) {
                if s.sample_rate() != rate || s.channels() != channels {
                    return Err(Error::Build(format!(
                        "{}/{role}: {} ch at {} Hz, pool is {channels} ch at {rate} Hz",
                        t.name,
                        s.channels(),
                        s.sample_rate()
                    )));
                }
                if s.len() != t.stems[0].len() {
                    return Err(Error::Build(format!("{}: stems differ in length", t.name)));
                }
            }
            if let Some(mix) = &t.mixture {
                if !mix.same_shape(&t.stems[0]) || mix.sample_rate() != rate {
                    return Err(Error::Build(format!("{}: mixture shape differs from stems", t.name)));
                }
                let err = stem_sum_error(mix, &t.stems);
                if err > STEM_SUM_TOLERANCE {
                    return Err(Error::StemSum { max_error: err });
                }
            }
        }
        Ok(Self { tracks })
    }

    /// Reads `dir/<track>/{vocals,bass,drums,other}.wav` (plus an optional
    /// `mixture.wav`) for every subdirectory, in name order.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut names: Vec<String> = fs::read_dir(dir)
            .map_err(|e| Error::at(dir, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        if names.is_empty() {
            return Err(Error::Build(format!("{}: no track directories", dir.display())));
        }
        let tracks = names
            .into_iter()
            .map(|name| {
                let track_dir = dir.join(&name);
                let stems = STEM_ROLES
                    .iter()
                    .map(|role| {
                        let path = track_dir.join(format!("{role}.wav"));
                        if !path.exists() {
                            return Err(Error::Build(format!("missing stem {}", path.display())));
                        }
                        read_wav(&path)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mix_path = track_dir.join("mixture.wav");
                let mixture = if mix_path.exists() { Some(read_wav(&mix_path)?) } else { None };
                Ok(Track { name, stems, mixture })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(tracks)
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn sample_rate(&self) -> u32 {
        self.tracks[0].stems[0].sample_rate()
    }

    pub fn channels(&self) -> usize {
        self.tracks[0].stems[0].channels()
    }

    /// Indices of tracks at least `samples` long.
    pub fn eligible(&self, samples: usize) -> Vec<usize> {
        (0..self.tracks.len()).filter(|&i| self.tracks[i].len() >= samples).collect()
    }
}
