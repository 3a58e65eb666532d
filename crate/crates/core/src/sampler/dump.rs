use std::io::{Read, Write};

use super::ChainDraws;
use crate::error::{Error, Result};
use crate::household::LatentState;

pub const DUMP_MAGIC: [u8; 8] = *b"CLTVCHN1";
pub const DUMP_VERSION: u32 = 1;

/// Writes a chain as: magic, version (u32), id length (u32) and UTF-8 id,
/// periods (u32), state count (u64), acceptance rate (f64), then every state
/// flattened in [`LatentState::to_flat`] order. All integers and floats are
/// little-endian.
pub fn write_dump<W: Write>(mut w: W, draws: &ChainDraws) -> Result<()> {
    w.write_all(&DUMP_MAGIC)?;
    w.write_all(&DUMP_VERSION.to_le_bytes())?;
    let id = draws.household_id.as_bytes();
    w.write_all(&(id.len() as u32).to_le_bytes())?;
    w.write_all(id)?;
    w.write_all(&(draws.periods as u32).to_le_bytes())?;
    w.write_all(&(draws.states.len() as u64).to_le_bytes())?;
    w.write_all(&draws.acceptance_rate.to_le_bytes())?;
    for st in &draws.states {
        for v in st.to_flat() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::Dump(e.to_string()))?;
    Ok(b)
}

/// Reads a dump written by [`write_dump`]. Returns the household id, the
/// periods, the acceptance rate and the states; moments are recomputed by the
/// caller from the matching panel.
pub fn read_dump<R: Read>(mut r: R) -> Result<(String, usize, f64, Vec<LatentState>)> {
    if read_array::<_, 8>(&mut r)? != DUMP_MAGIC {
        return Err(Error::Dump("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != DUMP_VERSION {
        return Err(Error::Dump(format!("unsupported version {version}")));
    }
    let len = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let mut id = vec![0u8; len];
    r.read_exact(&mut id).map_err(|e| Error::Dump(e.to_string()))?;
    let id = String::from_utf8(id).map_err(|e| Error::Dump(e.to_string()))?;
    let periods = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let count = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let rate = f64::from_le_bytes(read_array(&mut r)?);
    let width = LatentState::flat_len(periods);
    let mut states = Vec::with_capacity(count);
    let mut buf = vec![0.0; width];
    for _ in 0..count {
        for v in buf.iter_mut() {
            *v = f64::from_le_bytes(read_array(&mut r)?);
        }
        states.push(LatentState::from_flat(periods, &buf)?);
    }
    Ok((id, periods, rate, states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::household::fixtures::simple_panel;
    use crate::sampler::{initialize, SamplerConfig};

    #[test]
    fn dump_round_trips() {
        let p = simple_panel(2);
        let st = initialize(&p, None, &SamplerConfig::default()).unwrap();
        let draws = ChainDraws::from_states(&p, vec![st.clone(), st], 0.25);
        let mut bytes = Vec::new();
        write_dump(&mut bytes, &draws).unwrap();
        let (id, periods, rate, states) = read_dump(bytes.as_slice()).unwrap();
        assert_eq!((id, periods, rate), (p.id.clone(), 2, 0.25));
        assert_eq!(states, draws.states);
    }

    #[test]
    fn truncated_dump_is_an_error() {
        let p = simple_panel(1);
        let st = initialize(&p, None, &SamplerConfig::default()).unwrap();
        let mut bytes = Vec::new();
        write_dump(&mut bytes, &ChainDraws::from_states(&p, vec![st], 1.0)).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(read_dump(bytes.as_slice()), Err(Error::Dump(_))));
    }
}
