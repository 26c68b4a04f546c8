//! sRGB to normalized CIE L*a*b* (D65, 2° observer).

// sRGB (D65) to XYZ.
const M: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

// White point taken as the image of sRGB white so that white has zero chroma.
const WHITE: [f64; 3] = [
    M[0][0] + M[0][1] + M[0][2],
    M[1][0] + M[1][1] + M[1][2],
    M[2][0] + M[2][1] + M[2][2],
];

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

fn linearize(channel: u8) -> f64 {
    let c = channel as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

/// Unnormalized L*a*b*: L* in `[0, 100]`, a* and b* roughly in `[-128, 127]`.
pub fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let lin = [linearize(rgb[0]), linearize(rgb[1]), linearize(rgb[2])];
    let mut f = [0.0; 3];
    for (i, row) in M.iter().enumerate() {
        let xyz = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
        f[i] = lab_f(xyz / WHITE[i]);
    }
    [116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])]
}

/// L*a*b* with each band mapped affinely into `[0, 1]`: L* from `[0, 100]`,
/// a* and b* clamped to `[-128, 127]` first.
pub fn srgb_to_normalized_lab(rgb: [u8; 3]) -> [f64; 3] {
    let [l, a, b] = srgb_to_lab(rgb);
    let chroma = |v: f64| (v.clamp(-128.0, 127.0) + 128.0) / 255.0;
    [(l / 100.0).clamp(0.0, 1.0), chroma(a), chroma(b)]
}
