//! Plain-file exports for inspection: binary PGM frames, 16-bit PCM WAV,
//! and CSV tables.

use std::fmt::Write as _;

/// Binary (P5) greyscale image.
pub fn pgm_bytes(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height, "pixel count must match dimensions");
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Pixels in `[0, 1]` quantized to bytes.
pub fn pgm_from_unit(width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    let bytes: Vec<u8> = values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    pgm_bytes(width, height, &bytes)
}

/// Mono 16-bit PCM WAV; samples are clipped to `[-1, 1]`.
pub fn wav_bytes(samples: &[f64], sample_rate: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// `t,q1..qN` rows, one per frame.
pub fn motion_csv(frame_rate: f64, rows: &[Vec<f64>]) -> String {
    let joints = rows.first().map_or(0, Vec::len);
    let mut out = String::from("t");
    for j in 1..=joints {
        let _ = write!(out, ",q{j}");
    }
    out.push('\n');
    for (k, row) in rows.iter().enumerate() {
        let _ = write!(out, "{}", k as f64 / frame_rate);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// `frame,b0..bN` rows of spectrum magnitudes.
pub fn spec_csv(rows: &[Vec<f64>]) -> String {
    let bins = rows.first().map_or(0, Vec::len);
    let mut out = String::from("frame");
    for b in 0..bins {
        let _ = write!(out, ",b{b}");
    }
    out.push('\n');
    for (k, row) in rows.iter().enumerate() {
        let _ = write!(out, "{k}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_header_and_size() {
        let img = pgm_bytes(64, 64, &[7; 64 * 64]);
        assert!(img.starts_with(b"P5\n64 64\n255\n"));
        assert_eq!(img.len(), 13 + 64 * 64);
    }

    #[test]
    fn wav_layout() {
        let wav = wav_bytes(&[0.0, 1.0, -1.0, 2.0], 8000);
        assert_eq!(&wav[..4], b"RIFF");
        assert_eq!(u32::from_le_bytes(wav[4..8].try_into().unwrap()), 36 + 8);
        assert_eq!(u32::from_le_bytes(wav[24..28].try_into().unwrap()), 8000);
        let samples: Vec<i16> = wav[44..].chunks(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect();
        assert_eq!(samples, vec![0, 32767, -32767, 32767]);
    }

    #[test]
    fn csv_headers() {
        let m = motion_csv(25.0, &[vec![0.0; 6], vec![1.0; 6]]);
        assert!(m.starts_with("t,q1,q2,q3,q4,q5,q6\n0,"));
        assert_eq!(m.lines().count(), 3);
        assert!(m.lines().nth(2).unwrap().starts_with("0.04,"));
        let s = spec_csv(&[vec![0.5; 3]]);
        assert_eq!(s, "frame,b0,b1,b2\n0,0.5,0.5,0.5\n");
    }
}
