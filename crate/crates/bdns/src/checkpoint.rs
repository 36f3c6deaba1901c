//! Binary checkpoints: little-endian, self-describing.
//!
//! ```text
//! b"BDNS"  u32 version  u32 dim  u64 sizes[dim]  f64 lengths[dim]  f64 t
//! f64 rho[len]  f64 mom[dim][len]
//! ```

use std::io::{Read, Write};
use std::path::Path;

use bdns_core::{PeriodicGrid, State};

use crate::error::{CliError, Result};

const MAGIC: &[u8; 4] = b"BDNS";
const VERSION: u32 = 1;

pub fn encode(grid: &PeriodicGrid, state: &State) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 8 * grid.len() * (1 + grid.ndim()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&grid.dim().to_le_bytes());
    for &n in grid.sizes() {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for &l in grid.lengths() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out.extend_from_slice(&state.t.to_le_bytes());
    for v in state.rho.iter().chain(state.mom.iter().flatten()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> std::result::Result<[u8; N], String> {
        if self.0.len() < N {
            return Err("truncated checkpoint".into());
        }
        let (head, rest) = self.0.split_at(N);
        self.0 = rest;
        Ok(head.try_into().expect("length checked"))
    }
    fn u32(&mut self) -> std::result::Result<u32, String> {
        self.take().map(u32::from_le_bytes)
    }
    fn u64(&mut self) -> std::result::Result<u64, String> {
        self.take().map(u64::from_le_bytes)
    }
    fn f64(&mut self) -> std::result::Result<f64, String> {
        self.take().map(f64::from_le_bytes)
    }
    fn f64s(&mut self, n: usize) -> std::result::Result<Vec<f64>, String> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<(PeriodicGrid, State), String> {
    let mut c = Cursor(bytes);
    if &c.take::<4>()? != MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let dim = c.u32()?;
    if !(1..=2).contains(&dim) {
        return Err(format!("unsupported dimension {dim}"));
    }
    let sizes = (0..dim)
        .map(|_| c.u64().and_then(|n| usize::try_from(n).map_err(|e| e.to_string())))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let lengths = c.f64s(dim as usize)?;
    let grid = PeriodicGrid::new(dim, &sizes, &lengths).map_err(|e| e.to_string())?;
    let t = c.f64()?;
    let rho = c.f64s(grid.len())?;
    let mom = (0..dim).map(|_| c.f64s(grid.len())).collect::<std::result::Result<Vec<_>, _>>()?;
    if !c.0.is_empty() {
        return Err(format!("{} trailing bytes", c.0.len()));
    }
    let state = State::new(&grid, t, rho, mom).map_err(|e| e.to_string())?;
    Ok((grid, state))
}

pub fn write(path: &Path, grid: &PeriodicGrid, state: &State) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(&encode(grid, state)).map_err(|e| CliError::io(path, e))
}

pub fn read(path: &Path) -> Result<(PeriodicGrid, State)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|msg| CliError::Checkpoint { path: path.into(), msg })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_corruption() {
        let grid = PeriodicGrid::new(2, &[8, 10], &[1.0, 2.0]).unwrap();
        let rho: Vec<f64> = (0..80).map(|i| 1.0 + i as f64).collect();
        let mom = vec![vec![0.5; 80], (0..80).map(|i| -(i as f64)).collect()];
        let st = State::new(&grid, 0.25, rho, mom).unwrap();
        let bytes = encode(&grid, &st);
        assert_eq!(bytes.len(), 4 + 4 + 4 + 16 + 16 + 8 + 8 * 240);
        assert_eq!(decode(&bytes).unwrap(), (grid, st));

        assert!(decode(&bytes[..bytes.len() - 1]).unwrap_err().contains("truncated"));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).unwrap_err().contains("trailing"));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).unwrap_err().contains("magic"));
        let mut v2 = bytes;
        v2[4] = 2;
        assert!(decode(&v2).unwrap_err().contains("version"));
    }
}
