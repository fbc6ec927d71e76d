use crate::depth::DepthMap;
use crate::error::Result;

/// Where a pixel's current depth came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Invalid,
    Seed,
    Propagated,
    Estimated,
}

impl Provenance {
    /// Gray level used for provenance images.
    pub fn code(self) -> u8 {
        match self {
            Provenance::Invalid => 0,
            Provenance::Seed => 255,
            Provenance::Propagated => 170,
            Provenance::Estimated => 85,
        }
    }
}

/// Working depth of one keyframe during densification.
///
/// `values[i]` is meaningful only where `known[i]`; seed pixels are never
/// reassigned by propagation or estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct DensifyState {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub known: Vec<bool>,
    pub seedmask: Vec<bool>,
    pub provenance: Vec<Provenance>,
    /// Pixel whose depth a propagated or estimated value was derived from.
    pub origin: Vec<Option<usize>>,
    pub iteration: usize,
    range: crate::depth::DepthRange,
}

impl DensifyState {
    pub fn from_seeds(seeds: &DepthMap) -> Self {
        let (width, height) = seeds.dims();
        let known = seeds.mask().to_vec();
        DensifyState {
            width,
            height,
            values: seeds.values().to_vec(),
            provenance: known
                .iter()
                .map(|&k| if k { Provenance::Seed } else { Provenance::Invalid })
                .collect(),
            seedmask: known.clone(),
            origin: vec![None; known.len()],
            known,
            iteration: 0,
            range: seeds.range(),
        }
    }

    pub fn range(&self) -> crate::depth::DepthRange {
        self.range
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn known_count(&self) -> usize {
        self.known.iter().filter(|&&k| k).count()
    }

    pub(crate) fn set(&mut self, i: usize, z: f64, how: Provenance, origin: usize) {
        self.values[i] = z;
        self.known[i] = true;
        self.provenance[i] = how;
        self.origin[i] = Some(origin);
    }

    pub(crate) fn clear(&mut self, i: usize) {
        self.values[i] = 0.0;
        self.known[i] = false;
        self.provenance[i] = Provenance::Invalid;
        self.origin[i] = None;
    }

    pub fn depth(&self) -> Result<DepthMap> {
        let values: Vec<Option<f64>> = self
            .values
            .iter()
            .zip(&self.known)
            .map(|(&z, &k)| k.then_some(self.range.clamp(z)))
            .collect();
        DepthMap::from_options(self.width, self.height, &values, self.range)
    }
}
