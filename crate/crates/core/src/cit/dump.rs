use std::io::{Read, Write};

use super::{CitCounters, InteractionMatrix, Provenance, TensorParts};
use crate::clustering::ClusterMap;
use crate::spectral::VoxelGrid;
use crate::tensor::Sym4;
use crate::{ClusterId, Error, Result};

pub const DUMP_MAGIC: &[u8; 8] = b"CROMCIT\0";
pub const DUMP_VERSION: u32 = 1;

/// Writes a matrix tagged with the grid and cluster map it belongs to.
pub fn write_matrix(w: &mut impl Write, m: &InteractionMatrix, grid: &VoxelGrid, map: &ClusterMap) -> Result<()> {
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&DUMP_VERSION.to_le_bytes())?;
    w.write_all(&grid.hash())?;
    w.write_all(&map.hash())?;
    w.write_all(&(m.ids.len() as u64).to_le_bytes())?;
    for id in &m.ids {
        w.write_all(&id.0.to_le_bytes())?;
    }
    for f in &m.fractions {
        w.write_all(&f.to_le_bytes())?;
    }
    for (p, prov) in m.entries.iter().zip(&m.provenance) {
        for v in p.a.iter().chain(p.b.iter()) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&[match prov {
            Provenance::Full => 0u8,
            Provenance::Symmetry => 1,
            Provenance::Retained => 2,
        }])?;
    }
    for c in [m.counters.full, m.counters.symmetry, m.counters.retained] {
        w.write_all(&(c as u64).to_le_bytes())?;
    }
    Ok(())
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::CorruptDump(e.to_string()))?;
    Ok(b)
}

/// Reads a matrix, rejecting dumps made for another grid or cluster map.
pub fn read_matrix(r: &mut impl Read, grid: &VoxelGrid, map: &ClusterMap) -> Result<InteractionMatrix> {
    if &take::<8>(r)? != DUMP_MAGIC {
        return Err(Error::CorruptDump("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(r)?);
    if version != DUMP_VERSION {
        return Err(Error::CorruptDump(format!("unsupported version {version}")));
    }
    if take::<32>(r)? != grid.hash() {
        return Err(Error::CorruptDump("grid hash mismatch".into()));
    }
    if take::<32>(r)? != map.hash() {
        return Err(Error::CorruptDump("cluster map hash mismatch".into()));
    }
    let n = u64::from_le_bytes(take(r)?) as usize;
    if n != map.n_clusters() {
        return Err(Error::CorruptDump(format!("{n} clusters in dump, {} in map", map.n_clusters())));
    }
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        ids.push(ClusterId(u32::from_le_bytes(take(r)?)));
    }
    if ids != map.ids() {
        return Err(Error::CorruptDump("cluster ids differ from map".into()));
    }
    let mut fractions = Vec::with_capacity(n);
    for _ in 0..n {
        fractions.push(f64::from_le_bytes(take(r)?));
    }
    let mut entries = Vec::with_capacity(n * n);
    let mut provenance = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let mut vals = [0.0; 18];
        for v in vals.iter_mut() {
            *v = f64::from_le_bytes(take(r)?);
        }
        entries.push(TensorParts {
            a: Sym4::from_column_slice(&vals[..9]),
            b: Sym4::from_column_slice(&vals[9..]),
        });
        provenance.push(match take::<1>(r)?[0] {
            0 => Provenance::Full,
            1 => Provenance::Symmetry,
            2 => Provenance::Retained,
            t => return Err(Error::CorruptDump(format!("bad provenance tag {t}"))),
        });
    }
    let mut counts = [0usize; 3];
    for c in counts.iter_mut() {
        *c = u64::from_le_bytes(take(r)?) as usize;
    }
    let counters = CitCounters { full: counts[0], symmetry: counts[1], retained: counts[2] };
    Ok(InteractionMatrix { ids, fractions, entries, provenance, counters })
}
