//! Periodic and intra-unit interatomic distance matrices.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::polymer::CoordinateFrame;

const BINARY_MAGIC: &[u8; 4] = b"PDMX";
const BINARY_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("no frames supplied")]
    NoFrames,
    #[error("frame size mismatch: frame {frame} has {rows} rows, expected {expected}")]
    FrameSize { frame: usize, rows: usize, expected: usize },
    #[error("frame {frame}: non-finite coordinate for atom {atom}")]
    NonFinite { frame: usize, atom: usize },
    #[error("bad matrix file: {0}")]
    BadFile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixMode {
    Periodic,
    IntraUnit,
}

/// Symmetric N×N matrix of distances in Å with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicDistanceMatrix {
    n: usize,
    values: Vec<f64>,
    mode: MatrixMode,
}

impl PeriodicDistanceMatrix {
    /// Wraps a row-major matrix, checking symmetry, zero diagonal and finiteness.
    pub fn from_values(n: usize, values: Vec<f64>, mode: MatrixMode) -> Result<Self, MetricError> {
        if values.len() != n * n {
            return Err(MetricError::BadFile(format!("expected {} values, got {}", n * n, values.len())));
        }
        for a in 0..n {
            if values[a * n + a] != 0.0 {
                return Err(MetricError::BadFile(format!("diagonal entry {a} is not zero")));
            }
            for b in 0..n {
                let v = values[a * n + b];
                if !v.is_finite() || v < 0.0 || v != values[b * n + a] {
                    return Err(MetricError::BadFile(format!("entry ({a},{b}) is invalid or asymmetric")));
                }
            }
        }
        Ok(Self { n, values, mode })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> MatrixMode {
        self.mode
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n + b]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Dense CSV with a header row of atom indices.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = (0..self.n).map(|i| i.to_string()).collect();
        writeln!(out, "atom,{}", header.join(","))?;
        for a in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|b| self.get(a, b).to_string()).collect();
            writeln!(out, "{a},{}", row.join(","))?;
        }
        Ok(())
    }

    /// 16-byte header (magic, u32 version, u64 N) followed by row-major
    /// little-endian f64 values.
    pub fn write_binary<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&BINARY_VERSION.to_le_bytes())?;
        out.write_all(&(self.n as u64).to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R, mode: MatrixMode) -> Result<Self, MetricError> {
        let bad = |e: io::Error| MetricError::BadFile(e.to_string());
        let mut header = [0u8; 16];
        input.read_exact(&mut header).map_err(bad)?;
        if &header[..4] != BINARY_MAGIC {
            return Err(MetricError::BadFile("bad magic".into()));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != BINARY_VERSION {
            return Err(MetricError::BadFile(format!("unsupported version {version}")));
        }
        let n = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        let mut values = Vec::with_capacity(n * n);
        let mut buf = [0u8; 8];
        for _ in 0..n * n {
            input.read_exact(&mut buf).map_err(bad)?;
            values.push(f64::from_le_bytes(buf));
        }
        Self::from_values(n, values, mode)
    }
}

fn check_frames(frames: &[CoordinateFrame]) -> Result<usize, MetricError> {
    let first = frames.first().ok_or(MetricError::NoFrames)?;
    let n = first.len();
    for (k, f) in frames.iter().enumerate() {
        if f.len() != n {
            return Err(MetricError::FrameSize { frame: k, rows: f.len(), expected: n });
        }
        if let Some(&atom) = f.non_finite_atoms().first() {
            return Err(MetricError::NonFinite { frame: k, atom });
        }
    }
    Ok(n)
}

#[inline]
fn squared_distance(p: &[f64; 3], q: &[f64; 3]) -> f64 {
    let (dx, dy, dz) = (p[0] - q[0], p[1] - q[1], p[2] - q[2]);
    dx * dx + dy * dy + dz * dz
}

fn build(frames: &[CoordinateFrame], mode: MatrixMode) -> Result<PeriodicDistanceMatrix, MetricError> {
    let n = check_frames(frames)?;
    let mut values = vec![0.0; n * n];
    let mut degenerate = 0usize;
    for a in 0..n {
        for b in a + 1..n {
            // sqrt is monotone and correctly rounded, so sqrt(min) == min(sqrt)
            let d = frames
                .iter()
                .map(|f| squared_distance(&f.coords[a], &f.coords[b]))
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            if d == 0.0 {
                degenerate += 1;
            }
            values[a * n + b] = d;
            values[b * n + a] = d;
        }
    }
    if degenerate > 0 {
        log::warn!("{degenerate} atom pairs at zero distance; they join every complex at any cutoff");
    }
    Ok(PeriodicDistanceMatrix { n, values, mode })
}

/// Entry (α, β) is the minimum over frames of the Euclidean distance between
/// atoms α and β within the same frame.
pub fn periodic_distance_matrix(frames: &[CoordinateFrame]) -> Result<PeriodicDistanceMatrix, MetricError> {
    build(frames, MatrixMode::Periodic)
}

/// Plain pairwise distances of a single frame (the non-periodic baseline).
pub fn intra_unit_distance_matrix(frame: &CoordinateFrame) -> Result<PeriodicDistanceMatrix, MetricError> {
    build(std::slice::from_ref(frame), MatrixMode::IntraUnit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(coords: &[[f64; 3]]) -> CoordinateFrame {
        CoordinateFrame::new(0, coords.to_vec())
    }

    /// Triple loop over (α, β, k) without the sqrt hoist.
    fn brute_force(frames: &[CoordinateFrame]) -> Vec<f64> {
        let n = frames[0].len();
        let mut out = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                let mut best = f64::INFINITY;
                for f in frames {
                    let (p, q) = (f.coords[a], f.coords[b]);
                    let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
                    best = best.min(d);
                }
                out[a * n + b] = best;
            }
        }
        out
    }

    #[test]
    fn single_frame_matches_intra_unit() {
        let f = frame(&[[0.0, 0.0, 0.0], [1.0, 2.0, 2.0], [-1.0, 0.5, 3.0]]);
        let p = periodic_distance_matrix(std::slice::from_ref(&f)).unwrap();
        let i = intra_unit_distance_matrix(&f).unwrap();
        assert_eq!(p.values(), i.values());
        assert_eq!(p.get(0, 1), 3.0);
        assert_eq!(p.mode(), MatrixMode::Periodic);
        assert_eq!(i.mode(), MatrixMode::IntraUnit);
    }

    #[test]
    fn takes_elementwise_minimum() {
        let f1 = frame(&[[0.0; 3], [0.0; 3], [5.0, 0.0, 0.0]]);
        let f2 = frame(&[[0.0; 3], [0.0; 3], [3.0, 0.0, 0.0]]);
        let d = periodic_distance_matrix(&[f1, f2]).unwrap();
        assert_eq!(d.get(1, 2), 3.0);
        assert_eq!(d.get(2, 1), 3.0);
        assert_eq!(d.get(0, 1), 0.0);
    }

    #[test]
    fn unit_square_and_single_atom() {
        let sq = frame(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]]);
        let d = intra_unit_distance_matrix(&sq).unwrap();
        assert_eq!(d.get(0, 1), 1.0);
        assert_eq!(d.get(1, 2), 1.0);
        assert_eq!(d.get(0, 2), 2f64.sqrt());
        assert_eq!(d.get(1, 3), 2f64.sqrt());
        let one = intra_unit_distance_matrix(&frame(&[[4.0, 5.0, 6.0]])).unwrap();
        assert_eq!(one.values(), &[0.0]);
    }

    #[test]
    fn input_errors() {
        assert_eq!(periodic_distance_matrix(&[]), Err(MetricError::NoFrames));
        let a = frame(&[[0.0; 3], [1.0; 3]]);
        let b = frame(&[[0.0; 3]]);
        assert!(matches!(periodic_distance_matrix(&[a.clone(), b]), Err(MetricError::FrameSize { frame: 1, .. })));
        let nan = frame(&[[0.0; 3], [f64::NAN, 0.0, 0.0]]);
        assert_eq!(intra_unit_distance_matrix(&nan), Err(MetricError::NonFinite { frame: 0, atom: 1 }));
    }

    #[test]
    fn binary_and_csv_export() {
        let f = frame(&[[0.0, 0.0, 0.0], [1.0, 2.0, 2.0]]);
        let d = intra_unit_distance_matrix(&f).unwrap();
        let mut buf = Vec::new();
        d.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 4 * 8);
        assert_eq!(&buf[..4], b"PDMX");
        let back = PeriodicDistanceMatrix::read_binary(&buf[..], MatrixMode::IntraUnit).unwrap();
        assert_eq!(back, d);
        let mut csv = Vec::new();
        d.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "atom,0,1\n0,0,3\n1,3,0\n");
    }

    fn frames_strategy() -> impl Strategy<Value = Vec<CoordinateFrame>> {
        (1usize..8, 1usize..5).prop_flat_map(|(n, k)| {
            prop::collection::vec(
                prop::collection::vec(prop::array::uniform3(-5.0f64..5.0), n).prop_map(|c| CoordinateFrame::new(0, c)),
                k,
            )
        })
    }

    proptest! {
        #[test]
        fn matches_triple_loop(frames in frames_strategy()) {
            let d = periodic_distance_matrix(&frames).unwrap();
            prop_assert_eq!(d.values(), &brute_force(&frames)[..]);
        }

        #[test]
        fn bounded_by_each_frame_and_order_free(frames in frames_strategy()) {
            let d = periodic_distance_matrix(&frames).unwrap();
            for f in &frames {
                let intra = intra_unit_distance_matrix(f).unwrap();
                for (p, i) in d.values().iter().zip(intra.values()) {
                    prop_assert!(p <= i);
                }
            }
            let mut rev = frames.clone();
            rev.reverse();
            rev.push(frames[0].clone());
            let again = periodic_distance_matrix(&rev).unwrap();
            prop_assert_eq!(again.values(), d.values());
        }

        #[test]
        fn relabeling_permutes_entries(frames in frames_strategy(), seed in any::<u64>()) {
            let n = frames[0].len();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let relabeled: Vec<CoordinateFrame> = frames.iter().map(|f| {
                let mut c = vec![[0.0; 3]; n];
                for (a, p) in f.coords.iter().enumerate() { c[perm[a]] = *p; }
                CoordinateFrame::new(f.permutation_id, c)
            }).collect();
            let d = periodic_distance_matrix(&frames).unwrap();
            let d2 = periodic_distance_matrix(&relabeled).unwrap();
            for a in 0..n {
                for b in 0..n {
                    prop_assert_eq!(d2.get(perm[a], perm[b]), d.get(a, b));
                }
            }
        }
    }
}
