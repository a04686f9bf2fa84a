use serde::{Deserialize, Serialize};

/// Supported orthogonal wavelets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveletKind {
    /// Haar, 2 taps.
    Haar,
    /// Daubechies with 2 vanishing moments, 4 taps.
    Db4,
    /// Near-symmetric Daubechies (symlet) with 4 vanishing moments, 8 taps.
    Sym4,
}

impl WaveletKind {
    pub const ALL: [WaveletKind; 3] = [WaveletKind::Haar, WaveletKind::Db4, WaveletKind::Sym4];

    pub fn name(self) -> &'static str {
        match self {
            WaveletKind::Haar => "haar",
            WaveletKind::Db4 => "db4",
            WaveletKind::Sym4 => "sym4",
        }
    }

    pub fn filter(self) -> WaveletFilter {
        WaveletFilter::new(self)
    }
}

const HAAR: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

const DB4: [f64; 4] = [
    -0.129_409_522_550_921_45,
    0.224_143_868_041_857_35,
    0.836_516_303_737_469,
    0.482_962_913_144_690_25,
];

const SYM4: [f64; 8] = [
    -0.075_765_714_789_273_33,
    -0.029_635_527_645_998_51,
    0.497_618_667_632_015_45,
    0.803_738_751_805_916_1,
    0.297_857_795_605_277_36,
    -0.099_219_543_576_847_22,
    -0.012_603_967_262_037_833,
    0.032_223_100_604_042_702,
];

/// Analysis and synthesis filter bank of an orthogonal wavelet.
///
/// Filters are stored in convolution order: an analysis coefficient is
/// `sum_j dec[j] * x[i - j]`. The highpass filters follow the quadrature-mirror
/// relation `dec_hi[j] = (-1)^(j+1) dec_lo[F-1-j]`, and synthesis filters are the
/// time reverses of the analysis ones.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilter {
    pub kind: WaveletKind,
    pub dec_lo: Vec<f64>,
    pub dec_hi: Vec<f64>,
    pub rec_lo: Vec<f64>,
    pub rec_hi: Vec<f64>,
}

impl WaveletFilter {
    pub fn new(kind: WaveletKind) -> Self {
        let dec_lo: Vec<f64> = match kind {
            WaveletKind::Haar => HAAR.to_vec(),
            WaveletKind::Db4 => DB4.to_vec(),
            WaveletKind::Sym4 => SYM4.to_vec(),
        };
        let f = dec_lo.len();
        let dec_hi: Vec<f64> = (0..f)
            .map(|j| {
                let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
                sign * dec_lo[f - 1 - j]
            })
            .collect();
        let rec_lo = dec_lo.iter().rev().copied().collect();
        let rec_hi = dec_hi.iter().rev().copied().collect();
        WaveletFilter {
            kind,
            dec_lo,
            dec_hi,
            rec_lo,
            rec_hi,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn len(&self) -> usize {
        self.dec_lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dec_lo.is_empty()
    }
}
