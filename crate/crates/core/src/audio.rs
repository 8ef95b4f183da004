//! Mono audio buffers and 16-bit PCM WAV I/O.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A mono time-domain signal. Samples are nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    /// Set when a multichannel file was averaged down to mono on read.
    pub downmixed: bool,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("audio samples must be finite".into()));
        }
        Ok(AudioBuffer {
            samples,
            sample_rate,
            downmixed: false,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Slice out `[begin, end)` seconds.
    pub fn slice_seconds(&self, begin: f64, end: f64) -> Result<AudioBuffer> {
        if !(0.0..=end).contains(&begin) {
            return Err(Error::Config(format!(
                "invalid slice [{begin}, {end})"
            )));
        }
        let b = (begin * self.sample_rate as f64).round() as usize;
        let e = ((end * self.sample_rate as f64).round() as usize).min(self.samples.len());
        let b = b.min(e);
        Ok(AudioBuffer {
            samples: self.samples[b..e].to_vec(),
            sample_rate: self.sample_rate,
            downmixed: self.downmixed,
        })
    }
}

fn read_exact_or(path: &Path, r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|_| Error::MalformedWav {
        path: path.to_path_buf(),
        reason: format!("truncated while reading {what}"),
    })
}

fn u32le(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

fn u16le(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

/// Read a RIFF/WAVE file containing 16-bit PCM. Multichannel input is
/// averaged down to mono (`downmixed` is set on the result). Unknown chunks
/// are skipped.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut hdr = [0u8; 12];
    read_exact_or(path, &mut r, &mut hdr, "RIFF header")?;
    if &hdr[0..4] != b"RIFF" || &hdr[8..12] != b"WAVE" {
        return Err(Error::MalformedWav {
            path: path.to_path_buf(),
            reason: "missing RIFF/WAVE magic".into(),
        });
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
    let mut data: Option<Vec<u8>> = None;

    loop {
        let mut chunk_hdr = [0u8; 8];
        match r.read_exact(&mut chunk_hdr) {
            Ok(()) => {}
            Err(_) => break, // end of file
        }
        let id = [chunk_hdr[0], chunk_hdr[1], chunk_hdr[2], chunk_hdr[3]];
        let size = u32le(&chunk_hdr[4..8]) as usize;
        match &id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::MalformedWav {
                        path: path.to_path_buf(),
                        reason: format!("fmt chunk too small ({size} bytes)"),
                    });
                }
                let mut body = vec![0u8; size];
                read_exact_or(path, &mut r, &mut body, "fmt chunk")?;
                fmt = Some((
                    u16le(&body[0..2]),
                    u16le(&body[2..4]),
                    u32le(&body[4..8]),
                    u16le(&body[14..16]),
                ));
            }
            b"data" => {
                let mut body = vec![0u8; size];
                read_exact_or(path, &mut r, &mut body, "data chunk")?;
                data = Some(body);
            }
            _ => {
                // skip unknown chunk, honoring even-byte padding
                let skip = size + (size & 1);
                let mut remaining = skip as u64;
                let mut scratch = [0u8; 4096];
                while remaining > 0 {
                    let n = remaining.min(scratch.len() as u64) as usize;
                    match r.read(&mut scratch[..n]) {
                        Ok(0) => break,
                        Ok(k) => remaining -= k as u64,
                        Err(e) => return Err(Error::io(path, e)),
                    }
                }
            }
        }
        if size & 1 == 1 && matches!(&id, b"fmt " | b"data") {
            let mut pad = [0u8; 1];
            let _ = r.read(&mut pad);
        }
    }

    let (format, channels, rate, bits) = fmt.ok_or_else(|| Error::MalformedWav {
        path: path.to_path_buf(),
        reason: "missing fmt chunk".into(),
    })?;
    let data = data.ok_or_else(|| Error::MalformedWav {
        path: path.to_path_buf(),
        reason: "missing data chunk".into(),
    })?;

    if format != 1 {
        return Err(Error::UnsupportedWav {
            path: path.to_path_buf(),
            field: "audio_format",
            value: format.to_string(),
        });
    }
    if bits != 16 {
        return Err(Error::UnsupportedWav {
            path: path.to_path_buf(),
            field: "bits_per_sample",
            value: bits.to_string(),
        });
    }
    if channels == 0 {
        return Err(Error::MalformedWav {
            path: path.to_path_buf(),
            reason: "zero channels".into(),
        });
    }
    if rate == 0 {
        return Err(Error::MalformedWav {
            path: path.to_path_buf(),
            reason: "zero sample rate".into(),
        });
    }

    let bytes_per_frame = 2 * channels as usize;
    let n_frames = data.len() / bytes_per_frame;
    let mut samples = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let mut acc = 0.0f64;
        for c in 0..channels as usize {
            let off = f * bytes_per_frame + 2 * c;
            let v = i16::from_le_bytes([data[off], data[off + 1]]);
            acc += v as f64 / 32768.0;
        }
        samples.push(acc / channels as f64);
    }

    Ok(AudioBuffer {
        samples,
        sample_rate: rate,
        downmixed: channels > 1,
    })
}

/// Duration in seconds from the WAV header without decoding samples.
pub fn wav_duration(path: impl AsRef<Path>) -> Result<f64> {
    let buf = read_wav(path)?;
    Ok(buf.duration_seconds())
}

/// Write a mono 16-bit PCM WAV. Samples are clamped to `[-1, 32767/32768]`
/// before quantization.
pub fn write_wav(audio: &AudioBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);

    let n = audio.samples.len();
    let data_bytes = (n * 2) as u32;
    let riff_size = 36 + data_bytes;

    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&riff_size.to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&audio.sample_rate.to_le_bytes());
    out.extend_from_slice(&(audio.sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_bytes.to_le_bytes());

    for &s in &audio.samples {
        let clamped = s.clamp(-1.0, 32767.0 / 32768.0);
        let q = (clamped * 32768.0).round() as i32;
        let q = q.clamp(-32768, 32767) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }

    w.write_all(&out).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
