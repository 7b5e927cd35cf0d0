//! Parametrised view of a model pair: per column, the stacking order of cells
//! and the interior curves between them.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};

use super::FreeSet;
use crate::bell::OutcomeCell;
use crate::geometry::{Layer, ModelPair, RegionModel, Side, SineCurve};

const AREA_TOL: f64 = 1e-12;
/// Curves this close somewhere in their column are treated as touching.
const TOUCH_TOL: f64 = 1e-9;
/// Narrowest column the search may create by moving breakpoints.
const MIN_WIDTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Param {
    /// Common offset of a group of mutually touching curves.
    Offset {
        station: usize,
        column: usize,
        group: usize,
    },
    Amplitude {
        station: usize,
        column: usize,
        curve: usize,
    },
    Phase {
        station: usize,
        column: usize,
        curve: usize,
    },
    /// Interior breakpoint `index` (0 and 2π never move).
    Break { station: usize, index: usize },
}

impl Param {
    /// Natural size of a unit step in this coordinate.
    pub fn scale(self) -> f64 {
        match self {
            Param::Offset { .. } | Param::Amplitude { .. } => 1.0,
            Param::Phase { .. } => PI,
            Param::Break { .. } => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
struct ColumnLayout {
    cells: Vec<OutcomeCell>,
    /// `curves[k]` separates `cells[k]` (below) from `cells[k + 1]`.
    curves: Vec<SineCurve>,
    /// Runs of consecutive curves that touch in the seed. Their offsets move
    /// together so the contact survives; runs touching the chart's bottom or
    /// top are absent and their offsets never move.
    groups: Vec<Vec<usize>>,
}

impl ColumnLayout {
    fn lower(&self, k: usize) -> SineCurve {
        if k == 0 {
            SineCurve::ZERO
        } else {
            self.curves[k - 1]
        }
    }

    fn upper(&self, k: usize) -> SineCurve {
        self.curves.get(k).copied().unwrap_or(SineCurve::ONE)
    }
}

#[derive(Debug, Clone)]
struct StationLayout {
    side: Side,
    breaks: Vec<f64>,
    columns: Vec<ColumnLayout>,
}

impl StationLayout {
    fn from_model(model: &RegionModel) -> Self {
        let columns = model
            .columns()
            .iter()
            .map(|c| {
                let curves: Vec<SineCurve> = c.layers[..c.layers.len() - 1].iter().map(|l| l.upper).collect();
                ColumnLayout {
                    cells: c.layers.iter().map(|l| l.cell).collect(),
                    groups: touching_groups(&curves, c.x0, c.x1),
                    curves,
                }
            })
            .collect();
        StationLayout {
            side: model.side(),
            breaks: model.breakpoints(),
            columns,
        }
    }

    fn areas(&self) -> [f64; 4] {
        let mut a = [0.0; 4];
        for (j, col) in self.columns.iter().enumerate() {
            let (x0, x1) = (self.breaks[j], self.breaks[j + 1]);
            for (k, cell) in col.cells.iter().enumerate() {
                a[cell.index()] += col.upper(k).integral(x0, x1) - col.lower(k).integral(x0, x1);
            }
        }
        a
    }

    fn area_dev(&self) -> f64 {
        self.areas().iter().map(|a| (a - PI / 2.0).abs()).fold(0.0, f64::max)
    }

    fn to_model(&self) -> Option<RegionModel> {
        let columns: Vec<(f64, f64, Vec<Layer>)> = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, col)| {
                let layers = col
                    .cells
                    .iter()
                    .enumerate()
                    .map(|(k, &cell)| Layer {
                        cell,
                        lower: col.lower(k),
                        upper: col.upper(k),
                    })
                    .collect();
                (self.breaks[j], self.breaks[j + 1], layers)
            })
            .collect();
        RegionModel::from_columns(self.side, &columns).ok()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    stations: [StationLayout; 2],
}

impl Layout {
    pub fn from_models(pair: &ModelPair) -> Self {
        Layout {
            stations: [
                StationLayout::from_model(&pair.left),
                StationLayout::from_model(&pair.right),
            ],
        }
    }

    pub fn parameters(&self, free: FreeSet) -> Vec<Param> {
        let stations: &[usize] = match free {
            FreeSet::LeftCurves => &[0],
            FreeSet::Curves | FreeSet::All => &[0, 1],
        };
        let mut params = Vec::new();
        for &station in stations {
            let st = &self.stations[station];
            for (column, col) in st.columns.iter().enumerate() {
                params.extend((0..col.groups.len()).map(|group| Param::Offset { station, column, group }));
                for curve in 0..col.curves.len() {
                    params.push(Param::Amplitude { station, column, curve });
                    if free != FreeSet::LeftCurves {
                        params.push(Param::Phase { station, column, curve });
                    }
                }
            }
            if free == FreeSet::All {
                params.extend((1..st.breaks.len() - 1).map(|index| Param::Break { station, index }));
            }
        }
        params
    }

    fn get(&self, p: Param) -> f64 {
        match p {
            Param::Offset { station, column, group } => {
                let col = &self.stations[station].columns[column];
                col.curves[col.groups[group][0]].offset
            }
            Param::Amplitude { station, column, curve } => {
                self.stations[station].columns[column].curves[curve].amplitude
            }
            Param::Phase { station, column, curve } => self.stations[station].columns[column].curves[curve].phase,
            Param::Break { station, index } => self.stations[station].breaks[index],
        }
    }

    fn set(&mut self, p: Param, v: f64) {
        match p {
            Param::Offset { station, column, group } => {
                let col = &mut self.stations[station].columns[column];
                let delta = v - col.curves[col.groups[group][0]].offset;
                for &k in &col.groups[group] {
                    col.curves[k].offset += delta;
                }
            }
            Param::Amplitude { station, column, curve } => {
                self.stations[station].columns[column].curves[curve].amplitude = v
            }
            Param::Phase { station, column, curve } => self.stations[station].columns[column].curves[curve].phase = v,
            Param::Break { station, index } => self.stations[station].breaks[index] = v,
        }
    }

    pub fn values(&self, free: &[Param]) -> Vec<f64> {
        free.iter().map(|&p| self.get(p)).collect()
    }

    fn with(&self, free: &[Param], values: &[f64]) -> Layout {
        let mut out = self.clone();
        for (&p, &v) in free.iter().zip(values) {
            out.set(p, v);
        }
        out
    }

    /// Shifts the free offset groups of each station by the least-norm
    /// correction that makes all four cell areas exactly π/2.
    fn repair(&mut self, free: &[Param]) -> Option<()> {
        for station in 0..2 {
            let offsets: Vec<(usize, usize)> = free
                .iter()
                .filter_map(|p| match *p {
                    Param::Offset {
                        station: s,
                        column,
                        group,
                    } if s == station => Some((column, group)),
                    _ => None,
                })
                .collect();
            let st = &mut self.stations[station];
            if !offsets.is_empty() {
                let mut jac = DMatrix::<f64>::zeros(4, offsets.len());
                for (i, &(column, group)) in offsets.iter().enumerate() {
                    let width = st.breaks[column + 1] - st.breaks[column];
                    let col = &st.columns[column];
                    let members = &col.groups[group];
                    // raising the run grows the layer beneath it and shrinks the one above
                    jac[(col.cells[members[0]].index(), i)] += width;
                    jac[(col.cells[members[members.len() - 1] + 1].index(), i)] -= width;
                }
                let areas = st.areas();
                let deficit = DVector::from_iterator(4, areas.iter().map(|a| PI / 2.0 - a));
                let pinv = jac.pseudo_inverse(1e-12).ok()?;
                let delta = pinv * deficit;
                for (i, &(column, group)) in offsets.iter().enumerate() {
                    let col = &mut st.columns[column];
                    for &k in &col.groups[group] {
                        col.curves[k].offset += delta[i];
                    }
                }
            }
            if st.area_dev() > AREA_TOL {
                return None;
            }
        }
        Some(())
    }

    /// Applies `values`, repairs areas and builds the models. `None` when the
    /// candidate is not a partition with equal cell areas.
    pub fn realise(&self, free: &[Param], values: &[f64]) -> Option<(ModelPair, Vec<f64>)> {
        let mut layout = self.with(free, values);
        for st in &layout.stations {
            let ordered = st.breaks.windows(2).all(|w| w[1] - w[0] >= MIN_WIDTH);
            if !ordered || st.breaks[0] != 0.0 || st.breaks[st.breaks.len() - 1] != TAU {
                return None;
            }
        }
        layout.repair(free)?;
        let left = layout.stations[0].to_model()?;
        let right = layout.stations[1].to_model()?;
        let repaired = layout.values(free);
        Some((ModelPair { left, right }, repaired))
    }

    /// Variants of the seed in which every riding band (a band between two
    /// sine curves) is replaced by a flat slab or by a constant-thickness band
    /// parallel to the curve beneath it.
    pub fn templates(&self, free: &[Param]) -> Vec<(&'static str, Vec<f64>)> {
        let riding: Vec<(usize, usize, usize)> = free
            .iter()
            .filter_map(|p| match *p {
                Param::Amplitude { station, column, curve } if curve > 0 => {
                    let col = &self.stations[station].columns[column];
                    let (below, this) = (col.curves[curve - 1], col.curves[curve]);
                    (!below.is_flat() && !this.is_flat()).then_some((station, column, curve))
                }
                _ => None,
            })
            .collect();
        if riding.is_empty() {
            return Vec::new();
        }
        let mut slab = self.clone();
        let mut parallel = self.clone();
        for &(s, j, k) in &riding {
            slab.stations[s].columns[j].curves[k].amplitude = 0.0;
            let below = self.stations[s].columns[j].curves[k - 1];
            let c = &mut parallel.stations[s].columns[j].curves[k];
            c.amplitude = below.amplitude;
            c.phase = below.phase;
        }
        vec![("slab", slab.values(free)), ("parallel", parallel.values(free))]
    }
}

/// Splits the interior curves of a column into runs of touching neighbours,
/// dropping runs that touch the chart's bottom or top.
fn touching_groups(curves: &[SineCurve], x0: f64, x1: f64) -> Vec<Vec<usize>> {
    let touches = |a: &SineCurve, b: &SineCurve| b.minus(a).min_on(x0, x1) <= TOUCH_TOL;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for k in 0..curves.len() {
        match groups.last_mut() {
            Some(g) if touches(&curves[k - 1], &curves[k]) => g.push(k),
            _ => groups.push(vec![k]),
        }
    }
    groups.retain(|g| {
        let (lo, hi) = (&curves[g[0]], &curves[g[g.len() - 1]]);
        !touches(&SineCurve::ZERO, lo) && !touches(hi, &SineCurve::ONE)
    });
    groups
}
