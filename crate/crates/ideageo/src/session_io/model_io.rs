//! Binary persistence of embedding models.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic "IDGM" | format version u32 | dim u32 | vocab size V u32 | doc count D u32
//! config: mode u8, window u32, epochs u32, negatives u32, workers u32,
//!         initial_rate f64, final_rate f64, subsample_threshold f64,
//!         seed u64, min_count u32 (0 = automatic)
//! vocab table: V x (term length u32, UTF-8 bytes, count u64)
//! doc id table: D x (id length u32, UTF-8 bytes)
//! word, output, doc matrices: row-major f64
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::SessionIoError;
use crate::corpus::Vocabulary;
use crate::embedding::{EmbeddingConfig, EmbeddingModel, TrainMode};
use crate::linalg::Mat;

const MAGIC: &[u8; 4] = b"IDGM";
pub const MODEL_FORMAT_VERSION: u32 = 1;

fn io_error(path: &Path, source: io::Error) -> SessionIoError {
    if source.kind() == io::ErrorKind::UnexpectedEof {
        SessionIoError::Truncated {
            path: path.to_path_buf(),
        }
    } else {
        SessionIoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Writes the model; the round trip through [`load_model`] is lossless.
pub fn save_model(model: &EmbeddingModel, path: &Path) -> Result<(), SessionIoError> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut w = BufWriter::new(file);
    write_model(model, &mut w).map_err(|e| io_error(path, e))?;
    w.flush().map_err(|e| io_error(path, e))
}

fn write_model(model: &EmbeddingModel, w: &mut impl Write) -> io::Result<()> {
    let config = model.config();
    let vocab = model.vocabulary();
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(MODEL_FORMAT_VERSION)?;
    w.write_u32::<LittleEndian>(config.dim as u32)?;
    w.write_u32::<LittleEndian>(vocab.len() as u32)?;
    w.write_u32::<LittleEndian>(model.doc_ids().len() as u32)?;

    w.write_u8(match config.mode {
        TrainMode::PvDm => 0,
        TrainMode::PvDbow => 1,
    })?;
    w.write_u32::<LittleEndian>(config.window as u32)?;
    w.write_u32::<LittleEndian>(config.epochs as u32)?;
    w.write_u32::<LittleEndian>(config.negatives as u32)?;
    w.write_u32::<LittleEndian>(config.workers as u32)?;
    w.write_f64::<LittleEndian>(config.initial_rate)?;
    w.write_f64::<LittleEndian>(config.final_rate)?;
    w.write_f64::<LittleEndian>(config.subsample_threshold)?;
    w.write_u64::<LittleEndian>(config.seed)?;
    w.write_u32::<LittleEndian>(config.min_count.unwrap_or(0) as u32)?;

    for i in 0..vocab.len() {
        let term = vocab.term(i).as_bytes();
        w.write_u32::<LittleEndian>(term.len() as u32)?;
        w.write_all(term)?;
        w.write_u64::<LittleEndian>(vocab.count(i))?;
    }
    for id in model.doc_ids() {
        let bytes = id.as_bytes();
        w.write_u32::<LittleEndian>(bytes.len() as u32)?;
        w.write_all(bytes)?;
    }
    for mat in [model.word_vectors(), model.output_vectors(), model.doc_vectors()] {
        for &v in mat.as_slice() {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

/// Reads a model written by [`save_model`].
pub fn load_model(path: &Path) -> Result<EmbeddingModel, SessionIoError> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| io_error(path, e))?;
    if &magic != MAGIC {
        return Err(SessionIoError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    let version = r
        .read_u32::<LittleEndian>()
        .map_err(|e| io_error(path, e))?;
    if version != MODEL_FORMAT_VERSION {
        return Err(SessionIoError::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
        });
    }

    read_model(path, &mut r).map_err(|e| io_error(path, e))
}

fn read_model(path: &Path, r: &mut impl Read) -> io::Result<EmbeddingModel> {
    let dim = r.read_u32::<LittleEndian>()? as usize;
    let vocab_size = r.read_u32::<LittleEndian>()? as usize;
    let doc_count = r.read_u32::<LittleEndian>()? as usize;

    let mode = match r.read_u8()? {
        0 => TrainMode::PvDm,
        1 => TrainMode::PvDbow,
        other => {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("unknown training mode tag {other} in '{}'", path.display()),
            ))
        }
    };
    let window = r.read_u32::<LittleEndian>()? as usize;
    let epochs = r.read_u32::<LittleEndian>()? as usize;
    let negatives = r.read_u32::<LittleEndian>()? as usize;
    let workers = r.read_u32::<LittleEndian>()? as usize;
    let initial_rate = r.read_f64::<LittleEndian>()?;
    let final_rate = r.read_f64::<LittleEndian>()?;
    let subsample_threshold = r.read_f64::<LittleEndian>()?;
    let seed = r.read_u64::<LittleEndian>()?;
    let min_count = match r.read_u32::<LittleEndian>()? {
        0 => None,
        n => Some(n as usize),
    };
    let config = EmbeddingConfig {
        dim,
        window,
        epochs,
        initial_rate,
        final_rate,
        negatives,
        mode,
        subsample_threshold,
        seed,
        workers,
        min_count,
    };

    let mut terms = Vec::with_capacity(vocab_size);
    let mut counts = Vec::with_capacity(vocab_size);
    for _ in 0..vocab_size {
        terms.push(read_string(r)?);
        counts.push(r.read_u64::<LittleEndian>()?);
    }
    let vocabulary = Vocabulary::from_parts(terms, counts);

    let mut doc_ids = Vec::with_capacity(doc_count);
    for _ in 0..doc_count {
        doc_ids.push(read_string(r)?);
    }

    let mut read_mat = |rows: usize| -> io::Result<Mat> {
        let mut data = vec![0.0f64; rows * dim];
        for v in data.iter_mut() {
            *v = r.read_f64::<LittleEndian>()?;
        }
        Ok(Mat::from_vec(rows, dim, data))
    };
    let word_vectors = read_mat(vocab_size)?;
    let output_vectors = read_mat(vocab_size)?;
    let doc_vectors = read_mat(doc_count)?;

    Ok(EmbeddingModel::from_parts(
        vocabulary,
        config,
        word_vectors,
        output_vectors,
        doc_vectors,
        doc_ids,
    ))
}

fn read_string(r: &mut impl Read) -> io::Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::embedding::{infer_vector, train};

    fn trained_model() -> EmbeddingModel {
        let docs: Vec<Document> = [
            "alpha beta gamma alpha",
            "beta gamma delta beta",
            "gamma delta alpha gamma",
        ]
        .iter()
        .enumerate()
        .map(|(i, t)| Document::new(format!("doc{i}"), t))
        .collect();
        let config = EmbeddingConfig {
            dim: 6,
            epochs: 3,
            seed: 13,
            min_count: Some(1),
            ..EmbeddingConfig::default()
        };
        train(&docs, &config).unwrap()
    }

    #[test]
    fn round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let model = trained_model();
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();

        assert_eq!(loaded.word_vectors(), model.word_vectors());
        assert_eq!(loaded.output_vectors(), model.output_vectors());
        assert_eq!(loaded.doc_vectors(), model.doc_vectors());
        assert_eq!(loaded.doc_ids(), model.doc_ids());
        assert_eq!(loaded.config(), model.config());
        assert_eq!(loaded.vocabulary(), model.vocabulary());

        // Inference must behave identically on the reloaded model.
        let tokens: Vec<String> = vec!["alpha".into(), "beta".into()];
        let a = infer_vector(&model, &tokens, 5, 0.025).unwrap();
        let b = infer_vector(&loaded, &tokens, 5, 0.025).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("not-a-model.bin");
        std::fs::write(&path, b"NOPE0000000000000000").unwrap();
        assert!(matches!(
            load_model(&path),
            Err(SessionIoError::BadMagic { .. })
        ));
    }

    #[test]
    fn unsupported_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("future.bin");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&99u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 64]);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(SessionIoError::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn truncation_yields_truncation_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let model = trained_model();
        save_model(&model, &path).unwrap();
        let full = std::fs::read(&path).unwrap();

        let truncated = dir.path().join("cut.bin");
        for cut in [5, 20, 60, full.len() / 2, full.len() - 1] {
            std::fs::write(&truncated, &full[..cut]).unwrap();
            assert!(
                matches!(
                    load_model(&truncated),
                    Err(SessionIoError::Truncated { .. })
                ),
                "cut at {cut} bytes should report truncation"
            );
        }
    }
}
