//! Versioned binary snapshots of hierarchies and PCA models.
//!
//! All integers and floats are little-endian; floats are stored as their
//! IEEE-754 bit patterns, so a round trip is lossless.
//!
//! ```text
//! header   "STAMSNAP"  version:u32 (= 1)  kind:u8 (1 = hierarchy, 2 = PCA)
//!
//! hierarchy
//!   ltm_disabled:u8 ltm_dynamic:u8 n_drop:u32 drop:u32*n_drop
//!   initialized:u8 images_seen:u64 n_layers:u32 layer*n_layers
//! layer
//!   rho:u32 stm_capacity:u32 alpha:f64 theta:u64 beta:f64 stride:u32
//!   window:u32 warmup:u32 metric:u8 (0 = euclidean, 1 = manhattan)
//!   clock:u64 next_id:u64
//!   patches:u64 novelties:u64 evictions:u64 consolidations:u64
//!   dbar_sum:f64 dbar_count:u64
//!   n_window:u32 window:f64*n_window          (oldest first)
//!   stm:pool ltm:pool
//! pool
//!   n:u32 (id:u64 select_count:u64 last_selected:u64 values:f64*rho^2)*n
//!
//! pca
//!   samples:u64 n_features:u32 n_components:u32
//!   mean:f64*n_features components:f64*(n_components*n_features) (row-major)
//!   n_spectrum:u32 spectrum:f64*n_spectrum
//! ```

use std::path::Path;

use nalgebra::DMatrix;

use crate::baselines::PcaModel;
use crate::error::{Error, Result};
use crate::model::{
    Ablation, CentroidMeta, CentroidPool, DistanceMetric, Hierarchy, LayerConfig, LayerMemory,
    LayerStats, NoveltyWindow, RunningMean,
};

pub const MAGIC: &[u8; 8] = b"STAMSNAP";
pub const VERSION: u32 = 1;

/// What a snapshot file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotKind {
    Hierarchy = 1,
    Pca = 2,
}

/// A decoded snapshot.
#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Hierarchy(Hierarchy),
    Pca(PcaModel),
}

impl Snapshot {
    pub fn kind(&self) -> SnapshotKind {
        match self {
            Self::Hierarchy(_) => SnapshotKind::Hierarchy,
            Self::Pca(_) => SnapshotKind::Pca,
        }
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn header(kind: SnapshotKind) -> Self {
        let mut w = Self(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION);
        w.u8(kind as u8);
        w
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn len(&mut self, n: usize) -> Result<()> {
        let n = u32::try_from(n)
            .map_err(|_| Error::Format(format!("{n} items do not fit a u32 count")))?;
        self.u32(n);
        Ok(())
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or(Error::Length {
                expected: self.pos.saturating_add(n),
                found: self.buf.len(),
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }
    fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::Format(format!("invalid boolean byte {b}"))),
        }
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Format("count overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|b| f64::from_bits(u64::from_le_bytes(b.try_into().expect("8 bytes"))))
            .collect())
    }
}

fn write_pool(w: &mut Writer, pool: &CentroidPool) -> Result<()> {
    w.len(pool.len())?;
    for i in 0..pool.len() {
        let m = pool.meta(i);
        w.u64(m.id);
        w.u64(m.select_count);
        w.u64(m.last_selected);
        for &v in pool.values(i) {
            w.f64(v);
        }
    }
    Ok(())
}

fn read_pool(r: &mut Reader<'_>, dim: usize) -> Result<CentroidPool> {
    let n = r.usize()?;
    let mut pool = CentroidPool::new(dim);
    for _ in 0..n {
        let meta = CentroidMeta {
            id: r.u64()?,
            select_count: r.u64()?,
            last_selected: r.u64()?,
        };
        let values = r.f64s(dim)?;
        pool.push(&values, meta);
    }
    Ok(pool)
}

/// Encode a hierarchy.
pub fn encode_hierarchy(h: &Hierarchy) -> Result<Vec<u8>> {
    let mut w = Writer::header(SnapshotKind::Hierarchy);
    let a = h.ablation();
    w.u8(a.ltm_disabled as u8);
    w.u8(a.ltm_dynamic as u8);
    w.len(a.drop_layers.len())?;
    for &l in &a.drop_layers {
        w.len(l)?;
    }
    w.u8(h.is_initialized() as u8);
    w.u64(h.images_seen());
    w.len(h.len())?;
    for layer in h.layers() {
        let c = layer.config();
        w.len(c.rho)?;
        w.len(c.stm_capacity)?;
        w.f64(c.alpha);
        w.u64(c.theta);
        w.f64(c.beta);
        w.len(c.stride)?;
        w.len(c.window)?;
        w.len(c.warmup)?;
        w.u8(match c.metric {
            DistanceMetric::Euclidean => 0,
            DistanceMetric::Manhattan => 1,
        });
        w.u64(layer.clock());
        w.u64(layer.next_id);
        let s = layer.stats();
        for v in [s.patches, s.novelties, s.evictions, s.consolidations] {
            w.u64(v);
        }
        let m = layer.running_mean();
        w.f64(m.sum);
        w.u64(m.count);
        w.len(layer.novelty_window().len())?;
        for v in layer.novelty_window().values() {
            w.f64(v);
        }
        write_pool(&mut w, layer.stm())?;
        write_pool(&mut w, layer.ltm())?;
    }
    Ok(w.0)
}

fn read_hierarchy(r: &mut Reader<'_>) -> Result<Hierarchy> {
    let ltm_disabled = r.bool()?;
    let ltm_dynamic = r.bool()?;
    let n_drop = r.usize()?;
    let drop_layers = (0..n_drop).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
    let ablation = Ablation {
        ltm_disabled,
        ltm_dynamic,
        drop_layers,
    };
    let initialized = r.bool()?;
    let images_seen = r.u64()?;
    let n_layers = r.usize()?;
    let mut configs = Vec::with_capacity(n_layers.min(64));
    let mut states = Vec::with_capacity(n_layers.min(64));
    for _ in 0..n_layers {
        let config = LayerConfig {
            rho: r.usize()?,
            stm_capacity: r.usize()?,
            alpha: r.f64()?,
            theta: r.u64()?,
            beta: r.f64()?,
            stride: r.usize()?,
            window: r.usize()?,
            warmup: r.usize()?,
            metric: match r.u8()? {
                0 => DistanceMetric::Euclidean,
                1 => DistanceMetric::Manhattan,
                b => return Err(Error::Format(format!("unknown metric tag {b}"))),
            },
        };
        config
            .validate()
            .map_err(|e| Error::Format(format!("bad layer config: {e}")))?;
        let clock = r.u64()?;
        let next_id = r.u64()?;
        let stats = LayerStats {
            patches: r.u64()?,
            novelties: r.u64()?,
            evictions: r.u64()?,
            consolidations: r.u64()?,
        };
        let dbar = RunningMean {
            sum: r.f64()?,
            count: r.u64()?,
        };
        let n_window = r.usize()?;
        if n_window > config.window {
            return Err(Error::Format(format!(
                "novelty window holds {n_window} values, capacity is {}",
                config.window
            )));
        }
        let mut novelty = NoveltyWindow::new(config.window);
        for v in r.f64s(n_window)? {
            novelty.push(v);
        }
        let dim = config.dim();
        let stm = read_pool(r, dim)?;
        let ltm = read_pool(r, dim)?;
        states.push((clock, next_id, stats, dbar, novelty, stm, ltm));
        configs.push(config);
    }
    let mut h = Hierarchy::new(configs, ablation).map_err(|e| Error::Format(e.to_string()))?;
    for (layer, (clock, next_id, stats, dbar, novelty, stm, ltm)) in h.layers.iter_mut().zip(states)
    {
        restore_layer(layer, clock, next_id, stats, dbar, novelty, stm, ltm);
    }
    h.initialized = initialized;
    h.images_seen = images_seen;
    Ok(h)
}

#[allow(clippy::too_many_arguments)]
fn restore_layer(
    layer: &mut LayerMemory,
    clock: u64,
    next_id: u64,
    stats: LayerStats,
    dbar: RunningMean,
    novelty: NoveltyWindow,
    stm: CentroidPool,
    ltm: CentroidPool,
) {
    layer.clock = clock;
    layer.next_id = next_id;
    layer.stats = stats;
    layer.dbar = dbar;
    layer.novelty = novelty;
    layer.stm = stm;
    layer.ltm = ltm;
    layer.hint = None;
}

/// Encode a PCA model.
pub fn encode_pca(m: &PcaModel) -> Result<Vec<u8>> {
    let mut w = Writer::header(SnapshotKind::Pca);
    w.u64(m.samples as u64);
    w.len(m.n_features())?;
    w.len(m.n_components())?;
    for &v in &m.mean {
        w.f64(v);
    }
    for r in 0..m.n_components() {
        for c in 0..m.n_features() {
            w.f64(m.components[(r, c)]);
        }
    }
    w.len(m.spectrum.len())?;
    for &v in &m.spectrum {
        w.f64(v);
    }
    Ok(w.0)
}

fn read_pca(r: &mut Reader<'_>) -> Result<PcaModel> {
    let samples = r.u64()? as usize;
    let n = r.usize()?;
    let m = r.usize()?;
    let mean = r.f64s(n)?;
    let flat = r.f64s(
        m.checked_mul(n)
            .ok_or_else(|| Error::Format("size overflow".into()))?,
    )?;
    let components = DMatrix::from_row_slice(m, n, &flat);
    let k = r.usize()?;
    let spectrum = r.f64s(k)?;
    if k < m {
        return Err(Error::Format(
            "spectrum shorter than the component count".into(),
        ));
    }
    Ok(PcaModel {
        mean,
        components,
        spectrum,
        samples,
    })
}

/// Decode a snapshot of either kind.
pub fn decode(bytes: &[u8]) -> Result<Snapshot> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Format("not a snapshot (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "snapshot version {version} is not supported (expected {VERSION})"
        )));
    }
    let snap = match r.u8()? {
        1 => Snapshot::Hierarchy(read_hierarchy(&mut r)?),
        2 => Snapshot::Pca(read_pca(&mut r)?),
        k => return Err(Error::Format(format!("unknown snapshot kind {k}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after the snapshot",
            bytes.len() - r.pos
        )));
    }
    Ok(snap)
}

pub fn save_hierarchy(h: &Hierarchy, path: &Path) -> Result<()> {
    std::fs::write(path, encode_hierarchy(h)?)?;
    Ok(())
}

pub fn save_pca(m: &PcaModel, path: &Path) -> Result<()> {
    std::fs::write(path, encode_pca(m)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Snapshot> {
    decode(&std::fs::read(path)?)
}
