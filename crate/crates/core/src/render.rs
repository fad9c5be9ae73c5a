//! Binary PPM (P6) output and the fixed colour palette.

use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];
pub const LIGHT: Rgb = [225, 225, 225];

/// "P6", width, height, 255, then row-major RGB bytes.
pub fn ppm(width: usize, height: usize, pixels: &[Rgb]) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::Precondition(format!(
            "image {width}x{height} needs {} pixels, got {}",
            width * height,
            pixels.len()
        )));
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.reserve(pixels.len() * 3);
    for p in pixels {
        out.extend_from_slice(p);
    }
    Ok(out)
}

/// FNV-1a, so colours do not depend on the std hasher.
pub fn fnv1a(words: impl IntoIterator<Item = u64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for w in words {
        for b in w.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Saturated colour from a hash; never white or near-grey.
pub fn palette(h: u64) -> Rgb {
    let hue = (h % 360) as f64;
    let s = 0.55 + ((h >> 16) % 40) as f64 / 100.0;
    let v = 0.55 + ((h >> 32) % 40) as f64 / 100.0;
    let c = v * s;
    let x = c * (1.0 - ((hue / 60.0) % 2.0 - 1.0).abs());
    let (r, g, b) = match (hue / 60.0) as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let to = |t: f64| ((t + m) * 255.0).round() as u8;
    [to(r), to(g), to(b)]
}

/// Small fixed palette for layer indices.
pub fn layer_colour(i: usize) -> Rgb {
    const P: [Rgb; 8] = [
        [31, 119, 180],
        [255, 127, 14],
        [44, 160, 44],
        [214, 39, 40],
        [148, 103, 189],
        [140, 86, 75],
        [227, 119, 194],
        [188, 189, 34],
    ];
    P[i % P.len()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_length() {
        let img = ppm(2, 1, &[[1, 2, 3], [4, 5, 6]]).unwrap();
        assert!(img.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(&img[img.len() - 6..], &[1, 2, 3, 4, 5, 6]);
        assert!(ppm(2, 2, &[[0; 3]]).is_err());
    }

    #[test]
    fn palette_is_stable() {
        assert_eq!(palette(fnv1a([3, 4])), palette(fnv1a([3, 4])));
        assert_ne!(fnv1a([3, 4]), fnv1a([4, 3]));
    }
}
