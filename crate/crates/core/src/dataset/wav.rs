use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::Waveform;
use crate::error::{PcgError, Result};
use crate::util::tmp_path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

const PCM16_SCALE: f64 = 32768.0;

/// Sample rate and per-channel sample count from the header alone.
pub fn wav_info(path: &Path) -> Result<(u32, usize)> {
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => PcgError::io(path, io),
        other => PcgError::Wav {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })?;
    Ok((reader.spec().sample_rate, reader.duration() as usize))
}

/// Loads a mono PCM16 or FLOAT32 WAV. Integer samples are scaled by 1/32768.
pub fn load_wav(path: &Path) -> Result<Waveform> {
    let wav_err = |message: String| PcgError::Wav {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) if io.kind() == std::io::ErrorKind::NotFound => {
            PcgError::io(path, io)
        }
        other => wav_err(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(wav_err(format!(
            "{} channels; only mono input is supported",
            spec.channels
        )));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / PCM16_SCALE))
            .collect::<std::result::Result<_, _>>(),
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (fmt, bits) => {
            return Err(wav_err(format!(
                "unsupported encoding {fmt:?} {bits}-bit; expected PCM16 or FLOAT32"
            )))
        }
    }
    .map_err(|e| wav_err(format!("truncated or corrupt data: {e}")))?;

    Waveform::new(samples, spec.sample_rate).map_err(|e| wav_err(e.to_string()))
}

/// Writes a mono WAV atomically. PCM16 output clips to the representable
/// range.
pub fn write_wav(path: &Path, w: &Waveform, encoding: WavEncoding) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => SampleFormat::Int,
            WavEncoding::Float32 => SampleFormat::Float,
        },
    };
    let tmp = tmp_path(path);
    let wav_err = |e: hound::Error| PcgError::Wav {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut writer = WavWriter::create(&tmp, spec).map_err(wav_err)?;
    for &s in &w.samples {
        match encoding {
            WavEncoding::Pcm16 => {
                let v = (s * PCM16_SCALE).round().clamp(-32768.0, 32767.0) as i16;
                writer.write_sample(v).map_err(wav_err)?;
            }
            WavEncoding::Float32 => writer.write_sample(s as f32).map_err(wav_err)?,
        }
    }
    writer.finalize().map_err(wav_err)?;
    std::fs::rename(&tmp, path).map_err(|e| PcgError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        write_wav(
            &p,
            &Waveform::new(vec![0.0; 4000], 4000).unwrap(),
            WavEncoding::Pcm16,
        )
        .unwrap();
        let w = load_wav(&p).unwrap();
        assert_eq!(w.sample_rate, 4000);
        assert_eq!(w.len(), 4000);
        assert!(w.samples.iter().all(|&v| v == 0.0));
        assert_eq!(wav_info(&p).unwrap(), (4000, 4000));
    }

    #[test]
    fn pcm16_full_scale() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("fs.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 4000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        w.write_sample(32767i16).unwrap();
        w.write_sample(-32768i16).unwrap();
        w.finalize().unwrap();
        let wf = load_wav(&p).unwrap();
        assert_eq!(wf.samples, vec![32767.0 / 32768.0, -1.0]);
    }

    #[test]
    fn float_round_trip_is_exact_to_f32() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let samples: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.01).sin() * 0.9).collect();
        let w = Waveform::new(samples.clone(), 16000).unwrap();
        write_wav(&p, &w, WavEncoding::Float32).unwrap();
        let back = load_wav(&p).unwrap();
        assert_eq!(back.sample_rate, 16000);
        assert_eq!(back.len(), samples.len());
        for (a, b) in samples.iter().zip(&back.samples) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_stereo_and_24bit() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("st.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 4000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(load_wav(&p), Err(PcgError::Wav { .. })));

        let p = dir.path().join("24.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 4000,
            bits_per_sample: 24,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        w.write_sample(0i32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(load_wav(&p), Err(PcgError::Wav { .. })));
    }

    #[test]
    fn truncated_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.wav");
        write_wav(
            &p,
            &Waveform::new(vec![0.5; 1000], 4000).unwrap(),
            WavEncoding::Pcm16,
        )
        .unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 501]).unwrap();
        assert!(matches!(load_wav(&p), Err(PcgError::Wav { .. })));
        std::fs::write(&p, &bytes[..20]).unwrap();
        assert!(matches!(load_wav(&p), Err(PcgError::Wav { .. })));
    }
}
