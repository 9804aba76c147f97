use std::fs;
use std::path::{Path, PathBuf};

use super::pack::MaskPack;
use super::pgm::{decode_pgm, encode_pgm};
use super::types::{MaskFrame, MaskSequence, RgbFrame, RgbVideo, SignedMapFrame, SignedMapSequence};
use super::MaskError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceFormat {
    MaskPack,
    PgmDir,
}

impl SequenceFormat {
    /// Directories are PGM frame sets, files are MaskPack containers.
    pub fn detect(path: &Path) -> SequenceFormat {
        if path.is_dir() {
            SequenceFormat::PgmDir
        } else {
            SequenceFormat::MaskPack
        }
    }
}

impl std::str::FromStr for SequenceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "maskpack" | "mskp" => Ok(SequenceFormat::MaskPack),
            "pgm_dir" | "pgm-dir" | "pgm" => Ok(SequenceFormat::PgmDir),
            other => Err(format!("unknown sequence format `{other}`")),
        }
    }
}

/// Video id derived from the file stem (or directory name).
pub fn video_id_for(path: &Path) -> String {
    path.file_stem()
        .or_else(|| path.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn load_mask_sequence(path: &Path, format: SequenceFormat) -> Result<MaskSequence, MaskError> {
    let id = video_id_for(path);
    match format {
        SequenceFormat::MaskPack => MaskPack::decode(&read(path)?)?.to_mask_sequence(&id),
        SequenceFormat::PgmDir => {
            let frames = read_pgm_dir(path)?
                .into_iter()
                .map(MaskFrame::from_grid)
                .collect::<Result<Vec<_>, _>>()?;
            MaskSequence::new(id, frames)
        }
    }
}

pub fn load_signed_sequence(
    path: &Path,
    format: SequenceFormat,
) -> Result<SignedMapSequence, MaskError> {
    let id = video_id_for(path);
    match format {
        SequenceFormat::MaskPack => MaskPack::decode(&read(path)?)?.to_signed_sequence(&id),
        SequenceFormat::PgmDir => {
            let frames = read_pgm_dir(path)?
                .into_iter()
                .map(SignedMapFrame::from_grid)
                .collect();
            SignedMapSequence::new(id, frames)
        }
    }
}

pub fn save_mask_sequence(path: &Path, seq: &MaskSequence) -> Result<(), MaskError> {
    write(path, &MaskPack::from_mask_sequence(seq).encode())
}

pub fn save_signed_sequence(path: &Path, seq: &SignedMapSequence) -> Result<(), MaskError> {
    write(path, &MaskPack::from_signed_sequence(seq).encode())
}

/// Writes one 8-bit PGM per frame as `f0000.pgm`, `f0001.pgm`, ...
pub fn save_pgm_dir(dir: &Path, seq: &MaskSequence) -> Result<(), MaskError> {
    fs::create_dir_all(dir).map_err(|e| MaskError::io(dir, e))?;
    for (t, frame) in seq.frames().iter().enumerate() {
        let p = dir.join(format!("f{t:04}.pgm"));
        write(&p, &encode_pgm(frame.grid()))?;
    }
    Ok(())
}

fn read_pgm_dir(dir: &Path) -> Result<Vec<super::types::Grid>, MaskError> {
    sorted_files(dir, "pgm")?
        .iter()
        .map(|p| decode_pgm(&read(p)?))
        .collect()
}

/// Files in `dir` with the given extension, ordered lexicographically by name.
pub fn sorted_files(dir: &Path, extension: &str) -> Result<Vec<PathBuf>, MaskError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| MaskError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case(extension))
        })
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if files.is_empty() {
        return Err(MaskError::EmptySequence);
    }
    Ok(files)
}

pub fn decode_png(bytes: &[u8]) -> Result<RgbFrame, MaskError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| MaskError::Image(e.to_string()))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    RgbFrame::new(h as usize, w as usize, img.into_raw())
}

pub fn encode_png(frame: &RgbFrame) -> Result<Vec<u8>, MaskError> {
    let mut out = std::io::Cursor::new(Vec::new());
    image::write_buffer_with_format(
        &mut out,
        frame.data(),
        frame.width() as u32,
        frame.height() as u32,
        image::ExtendedColorType::Rgb8,
        image::ImageFormat::Png,
    )
    .map_err(|e| MaskError::Image(e.to_string()))?;
    Ok(out.into_inner())
}

/// Loads a directory of PNG frames (lexicographic order) as one video.
pub fn load_png_video(dir: &Path) -> Result<RgbVideo, MaskError> {
    let frames = sorted_files(dir, "png")?
        .iter()
        .map(|p| decode_png(&read(p)?))
        .collect::<Result<Vec<_>, _>>()?;
    RgbVideo::new(frames)
}

pub fn save_png_video(dir: &Path, video: &RgbVideo) -> Result<(), MaskError> {
    fs::create_dir_all(dir).map_err(|e| MaskError::io(dir, e))?;
    for (t, frame) in video.frames().iter().enumerate() {
        write(&dir.join(format!("f{t:04}.png")), &encode_png(frame)?)?;
    }
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>, MaskError> {
    fs::read(path).map_err(|e| MaskError::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), MaskError> {
    fs::write(path, bytes).map_err(|e| MaskError::io(path, e))
}
