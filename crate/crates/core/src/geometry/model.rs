use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::path::Path;

use super::curve::{Primitive, PrimitiveKind, SineCurve};
use crate::bell::{reduce, Angle, OutcomeCell};
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Curves closer than this are treated as the same boundary.
const CURVE_TOL: f64 = 1e-9;
/// Allowed overshoot of `lower <= upper` and of the `[0, 1]` range.
const RANGE_TOL: f64 = 1e-12;
const BREAK_TOL: f64 = 1e-9;

const REFERENCE_MODEL: &str = include_str!("../../data/reference.model");
const ANALYTIC_MODEL: &str = include_str!("../../data/analytic.model");
const DEFAULT_SEED: &str = include_str!("../../data/seeds/default.model");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn label(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s {
            "left" => Some(Side::Left),
            "right" => Some(Side::Right),
            _ => None,
        }
    }

    /// Chart coordinate: `theta - phi` on the left, `theta + psi` on the right.
    #[inline]
    pub fn chart_x(self, theta: f64, setting: Angle) -> f64 {
        match self {
            Side::Left => theta - setting.radians(),
            Side::Right => theta + setting.radians(),
        }
    }
}

/// Shared hidden variables of one emitted pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiddenVars {
    pub theta: Angle,
    pub r: f64,
}

impl HiddenVars {
    pub fn new(theta: f64, r: f64) -> Self {
        HiddenVars {
            theta: Angle::new(theta),
            r,
        }
    }
}

/// One band of a column: `lower(x) <= r < upper(x)` belongs to `cell`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub cell: OutcomeCell,
    pub lower: SineCurve,
    pub upper: SineCurve,
}

/// Elementary x-interval with the cells stacked bottom to top.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Column {
    pub x0: f64,
    pub x1: f64,
    pub layers: Vec<Layer>,
}

/// A validated partition of the chart for one station.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionModel {
    side: Side,
    primitives: Vec<(OutcomeCell, Primitive)>,
    columns: Vec<Column>,
}

impl RegionModel {
    /// Builds the model, checking that the primitives tile the chart.
    pub fn new(side: Side, primitives: Vec<(OutcomeCell, Primitive)>) -> Result<Self> {
        let primitives = snap_breakpoints(primitives);
        for (cell, p) in &primitives {
            check_primitive(*cell, p)?;
        }
        let mut breaks: Vec<f64> = primitives.iter().flat_map(|(_, p)| [p.x0, p.x1]).collect();
        breaks.push(0.0);
        breaks.push(TAU);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        let mut columns = Vec::with_capacity(breaks.len() - 1);
        for w in breaks.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            let covering: Vec<&(OutcomeCell, Primitive)> =
                primitives.iter().filter(|(_, p)| p.x0 <= x0 && p.x1 >= x1).collect();
            columns.push(Column {
                x0,
                x1,
                layers: stack_column(x0, x1, &covering)?,
            });
        }
        Ok(RegionModel {
            side,
            primitives,
            columns,
        })
    }

    /// Builds a model from stacked columns given bottom to top.
    pub fn from_columns(side: Side, columns: &[(f64, f64, Vec<Layer>)]) -> Result<Self> {
        let mut prims: Vec<(OutcomeCell, Primitive)> = Vec::new();
        for (x0, x1, layers) in columns {
            for layer in layers {
                // extend the previous primitive when the band continues unchanged
                let merged = prims
                    .iter_mut()
                    .rev()
                    .find(|(c, p)| *c == layer.cell && p.x1 == *x0 && p.lower == layer.lower && p.upper == layer.upper);
                match merged {
                    Some((_, p)) => p.x1 = *x1,
                    None => prims.push((layer.cell, Primitive::new(*x0, *x1, layer.lower, layer.upper))),
                }
            }
        }
        RegionModel::new(side, prims)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn primitives(&self) -> &[(OutcomeCell, Primitive)] {
        &self.primitives
    }

    pub(crate) fn columns(&self) -> &[Column] {
        &self.columns
    }

    /// Column boundaries in chart coordinates, including 0 and `2pi`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.columns.iter().map(|c| c.x0).collect();
        b.push(TAU);
        b
    }

    #[inline]
    pub(crate) fn column_index(&self, x: f64) -> usize {
        let i = self.columns.partition_point(|c| c.x1 <= x);
        i.min(self.columns.len() - 1)
    }

    /// Cell at a chart point `x` (any real, reduced internally), `r` in `[0, 1)`.
    pub fn cell_at(&self, x: f64, r: f64) -> OutcomeCell {
        let x = reduce(x);
        let column = &self.columns[self.column_index(x)];
        column
            .layers
            .iter()
            .find(|l| r < l.upper.eval(x))
            .unwrap_or_else(|| column.layers.last().expect("non-empty column"))
            .cell
    }

    /// Outcome for hidden variables `hv` under the local `setting`.
    pub fn evaluate(&self, setting: Angle, hv: HiddenVars) -> OutcomeCell {
        self.cell_at(self.side.chart_x(hv.theta.radians(), setting), hv.r)
    }

    /// Total area of each cell, in `OutcomeCell` index order.
    pub fn cell_areas(&self) -> [f64; 4] {
        let mut a = [0.0; 4];
        for (cell, p) in &self.primitives {
            a[cell.index()] += p.area();
        }
        a
    }

    /// The same model with its chart rotated: the cell at `x` becomes the cell
    /// previously at `x - offset`.
    pub fn rotated(&self, offset: f64) -> Result<RegionModel> {
        let off = reduce(offset);
        let shift = |c: SineCurve| SineCurve::new(c.offset, c.amplitude, c.phase + off);
        let mut prims = Vec::new();
        for (cell, p) in &self.primitives {
            let (lower, upper) = (shift(p.lower), shift(p.upper));
            let (a, b) = (p.x0 + off, p.x1 + off);
            if b <= TAU {
                prims.push((*cell, Primitive::new(a, b, lower, upper)));
            } else if a >= TAU {
                prims.push((*cell, Primitive::new(a - TAU, b - TAU, lower, upper)));
            } else {
                prims.push((*cell, Primitive::new(a, TAU, lower, upper)));
                prims.push((*cell, Primitive::new(0.0, b - TAU, lower, upper)));
            }
        }
        RegionModel::new(self.side, prims)
    }

    pub fn primitives_of(&self, cell: OutcomeCell) -> impl Iterator<Item = &Primitive> {
        self.primitives.iter().filter(move |(c, _)| *c == cell).map(|(_, p)| p)
    }
}

fn snap_breakpoints(mut prims: Vec<(OutcomeCell, Primitive)>) -> Vec<(OutcomeCell, Primitive)> {
    let mut anchors: Vec<f64> = vec![0.0, TAU];
    let mut snap = |x: f64| -> f64 {
        if let Some(a) = anchors.iter().find(|a| (**a - x).abs() <= BREAK_TOL) {
            *a
        } else {
            anchors.push(x);
            x
        }
    };
    for (_, p) in &mut prims {
        p.x0 = snap(p.x0);
        p.x1 = snap(p.x1);
    }
    prims
}

fn check_primitive(cell: OutcomeCell, p: &Primitive) -> Result<()> {
    let bad = |msg: String| {
        Err(Error::Partition(format!(
            "{cell} primitive [{}, {}): {msg}",
            p.x0, p.x1
        )))
    };
    if !(p.x0.is_finite() && p.x1.is_finite() && 0.0 <= p.x0 && p.x0 < p.x1 && p.x1 <= TAU) {
        return bad("x-interval must satisfy 0 <= x0 < x1 <= 2pi".into());
    }
    if p.lower.min_on(p.x0, p.x1) < -RANGE_TOL || p.upper.max_on(p.x0, p.x1) > 1.0 + RANGE_TOL {
        return bad("boundary curves leave [0, 1]".into());
    }
    if p.upper.minus(&p.lower).min_on(p.x0, p.x1) < -RANGE_TOL {
        return bad("lower curve rises above upper curve".into());
    }
    if p.upper.same_as(&p.lower, CURVE_TOL) {
        return bad("degenerate band of zero thickness".into());
    }
    Ok(())
}

fn stack_column(x0: f64, x1: f64, covering: &[&(OutcomeCell, Primitive)]) -> Result<Vec<Layer>> {
    let mut used = vec![false; covering.len()];
    let mut layers = Vec::with_capacity(covering.len());
    let mut current = SineCurve::ZERO;
    while !current.same_as(&SineCurve::ONE, CURVE_TOL) {
        let next = covering
            .iter()
            .enumerate()
            .filter(|(i, (_, p))| !used[*i] && p.lower.same_as(&current, CURVE_TOL))
            .map(|(i, _)| i)
            .collect::<Vec<_>>();
        let &[i] = next.as_slice() else {
            return Err(Error::Partition(if next.is_empty() {
                format!(
                    "gap above r = {:.6} in column [{x0}, {x1})",
                    current.eval(0.5 * (x0 + x1))
                )
            } else {
                format!("overlapping primitives in column [{x0}, {x1})")
            }));
        };
        used[i] = true;
        let (cell, p) = covering[i];
        layers.push(Layer {
            cell: *cell,
            lower: p.lower,
            upper: p.upper,
        });
        current = p.upper;
    }
    if used.iter().any(|u| !u) {
        return Err(Error::Partition(format!(
            "overlapping primitives in column [{x0}, {x1})"
        )));
    }
    Ok(layers)
}

/// Left and right station models travelling together.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPair {
    pub left: RegionModel,
    pub right: RegionModel,
}

impl ModelPair {
    /// The shipped, validated geometry.
    pub fn reference() -> Self {
        Self::parse(REFERENCE_MODEL, "reference.model").expect("shipped reference model parses")
    }

    /// Closed-form layout that reproduces the target table exactly: a sliver
    /// of height `(pi/8) sin x` under a riding band of half that amplitude.
    pub fn analytic() -> Self {
        Self::parse(ANALYTIC_MODEL, "analytic.model").expect("shipped analytic model parses")
    }

    /// The default synthesis seed.
    pub fn default_seed() -> Self {
        Self::parse(DEFAULT_SEED, "seeds/default.model").expect("shipped seed parses")
    }

    /// Sign by half-chart, slot by `r < 1/2`, identical on both sides; no curves.
    pub fn quadrant() -> Self {
        let build = |side| {
            let cells = |s: &str| OutcomeCell::parse(s).expect("valid label");
            RegionModel::new(
                side,
                vec![
                    (cells("+E"), Primitive::rect(0.0, PI, 0.0, 0.5)),
                    (cells("+L"), Primitive::rect(0.0, PI, 0.5, 1.0)),
                    (cells("-E"), Primitive::rect(PI, TAU, 0.0, 0.5)),
                    (cells("-L"), Primitive::rect(PI, TAU, 0.5, 1.0)),
                ],
            )
            .expect("quadrant model is a partition")
        };
        ModelPair {
            left: build(Side::Left),
            right: build(Side::Right),
        }
    }

    /// Built-in models by name: `reference`, `quadrant`, `seed`.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "reference" => Some(Self::reference()),
            "analytic" => Some(Self::analytic()),
            "quadrant" => Some(Self::quadrant()),
            "seed" | "default" | "seeds/default" => Some(Self::default_seed()),
            _ => None,
        }
    }

    /// A built-in name or a path to a model file.
    pub fn load(spec: &str) -> Result<Self> {
        match Self::builtin(spec) {
            Some(m) => Ok(m),
            None => Self::read(Path::new(spec)),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: origin.to_string(),
            line,
            msg,
        };
        let mut version = None;
        let mut dim = None;
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "format" if fields.len() == 2 => {
                    let v: u32 = fields[1].parse().map_err(|_| err(n + 1, "bad format version".into()))?;
                    if v != MODEL_FORMAT_VERSION {
                        return Err(err(n + 1, format!("unsupported format version {v}")));
                    }
                    version = Some(v);
                }
                "d" if fields.len() == 2 => {
                    let d: u32 = fields[1].parse().map_err(|_| err(n + 1, "bad dimension".into()))?;
                    if d != 1 {
                        return Err(err(n + 1, format!("hidden-variable dimension {d} is not supported")));
                    }
                    dim = Some(d);
                }
                _ => {
                    if fields.len() != 11 {
                        return Err(err(n + 1, format!("expected 11 fields, got {}", fields.len())));
                    }
                    let side = Side::parse(fields[0]).ok_or_else(|| err(n + 1, format!("bad side {:?}", fields[0])))?;
                    let cell =
                        OutcomeCell::parse(fields[1]).ok_or_else(|| err(n + 1, format!("bad cell {:?}", fields[1])))?;
                    let mut nums = [0.0; 8];
                    for (slot, f) in nums.iter_mut().zip(&fields[3..]) {
                        *slot = f.parse().map_err(|_| err(n + 1, format!("bad number {f:?}")))?;
                    }
                    let prim = Primitive::new(
                        nums[0],
                        nums[1],
                        SineCurve::new(nums[2], nums[3], nums[4]),
                        SineCurve::new(nums[5], nums[6], nums[7]),
                    );
                    match (fields[2], prim.kind()) {
                        ("rect", PrimitiveKind::Rect) | ("curve", _) => {}
                        ("rect", _) => return Err(err(n + 1, "rect primitive with curved boundary".into())),
                        (k, _) => return Err(err(n + 1, format!("bad primitive kind {k:?}"))),
                    }
                    match side {
                        Side::Left => left.push((cell, prim)),
                        Side::Right => right.push((cell, prim)),
                    }
                }
            }
        }
        if version.is_none() || dim.is_none() {
            return Err(err(0, "missing format/d header".into()));
        }
        Ok(ModelPair {
            left: RegionModel::new(Side::Left, left)?,
            right: RegionModel::new(Side::Right, right)?,
        })
    }

    /// Text form: one primitive per line, 12 significant digits.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("# side cell kind x0 x1 c_lo A_lo d_lo c_hi A_hi d_hi\n");
        let _ = writeln!(out, "format {MODEL_FORMAT_VERSION}");
        out.push_str("d 1\n");
        for model in [&self.left, &self.right] {
            let mut prims = model.primitives().to_vec();
            prims.sort_by(|a, b| {
                a.0.cmp(&b.0)
                    .then(a.1.x0.total_cmp(&b.1.x0))
                    .then(a.1.lower.offset.total_cmp(&b.1.lower.offset))
            });
            for (cell, p) in prims {
                let _ = write!(out, "{} {} {}", model.side().label(), cell, p.kind().label());
                for v in [
                    p.x0,
                    p.x1,
                    p.lower.offset,
                    p.lower.amplitude,
                    p.lower.phase,
                    p.upper.offset,
                    p.upper.amplitude,
                    p.upper.phase,
                ] {
                    let _ = write!(out, " {}", fmt_sig12(v));
                }
                out.push('\n');
            }
        }
        out
    }
}

fn fmt_sig12(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:.11e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(s: &str) -> OutcomeCell {
        OutcomeCell::parse(s).unwrap()
    }

    #[test]
    fn quadrant_model_evaluates_by_half_chart() {
        let q = ModelPair::quadrant();
        assert_eq!(q.left.evaluate(Angle::ZERO, HiddenVars::new(1.0, 0.2)), cell("+E"));
        assert_eq!(q.left.evaluate(Angle::ZERO, HiddenVars::new(4.0, 0.7)), cell("-L"));
        // left shifts by -phi, right by +psi
        assert_eq!(q.left.evaluate(Angle::new(2.0), HiddenVars::new(1.0, 0.2)), cell("-E"));
        assert_eq!(q.right.evaluate(Angle::new(2.5), HiddenVars::new(1.0, 0.2)), cell("-E"));
        for a in q.left.cell_areas() {
            assert!((a - PI / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_points_belong_to_the_region_above() {
        let q = ModelPair::quadrant();
        assert_eq!(q.left.cell_at(1.0, 0.5), cell("+L"));
        assert_eq!(q.left.cell_at(PI, 0.1), cell("-E"));
        assert_eq!(q.left.cell_at(0.0, 0.0), cell("+E"));
        let seed = ModelPair::default_seed();
        // exactly on the sliver's upper curve
        let x = 1.0;
        let sliver = seed.left.primitives_of(cell("+E")).next().unwrap();
        let r = sliver.upper.eval(x);
        let on = seed.left.cell_at(x, r);
        let below = seed.left.cell_at(x, r - 1e-9);
        assert_eq!(below, cell("+E"));
        assert_ne!(on, below);
    }

    #[test]
    fn evaluation_wraps_around() {
        let m = ModelPair::reference();
        for k in 0..100 {
            let theta = k as f64 * 0.0731;
            let r = (k as f64 * 0.37).fract();
            let a = m.left.evaluate(Angle::new(0.3), HiddenVars::new(theta, r));
            let b = m.left.cell_at(theta - 0.3 + TAU, r);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn gaps_and_overlaps_are_rejected() {
        let gap = RegionModel::new(
            Side::Left,
            vec![
                (cell("+E"), Primitive::rect(0.0, TAU, 0.0, 0.4)),
                (cell("+L"), Primitive::rect(0.0, TAU, 0.5, 1.0)),
            ],
        );
        assert!(matches!(gap, Err(Error::Partition(_))));
        let overlap = RegionModel::new(
            Side::Left,
            vec![
                (cell("+E"), Primitive::rect(0.0, TAU, 0.0, 0.5)),
                (cell("-E"), Primitive::rect(0.0, 1.0, 0.0, 0.5)),
                (cell("+L"), Primitive::rect(0.0, TAU, 0.5, 1.0)),
            ],
        );
        assert!(matches!(overlap, Err(Error::Partition(_))));
        let out_of_range = RegionModel::new(
            Side::Left,
            vec![
                (
                    cell("+E"),
                    Primitive::new(0.0, TAU, SineCurve::ZERO, SineCurve::new(0.5, 0.6, 0.0)),
                ),
                (
                    cell("+L"),
                    Primitive::new(0.0, TAU, SineCurve::new(0.5, 0.6, 0.0), SineCurve::ONE),
                ),
            ],
        );
        assert!(matches!(out_of_range, Err(Error::Partition(_))));
    }

    #[test]
    fn render_and_parse_round_trip() {
        let m = ModelPair::reference();
        let text = m.render();
        let back = ModelPair::parse(&text, "mem").unwrap();
        assert_eq!(back.render(), text);
        assert_eq!(back.left.cell_areas(), m.left.cell_areas());
    }

    #[test]
    fn parse_rejects_bad_headers() {
        assert!(ModelPair::parse("format 2\nd 1\n", "x").is_err());
        assert!(ModelPair::parse("format 1\nd 2\n", "x").is_err());
        assert!(ModelPair::parse("left +E rect 0 1\n", "x").is_err());
    }
}
