//! Bird's-eye-view boundary rasters.
//!
//! A [`BevGrid`] covers a 24 m × 24 m region of interest centred on the
//! vehicle at 5 cm per cell (480 × 480 cells). Cell `(ix, iy)` holds points
//! with `ix = floor((x + 12) / 0.05)` and `iy = floor((y + 12) / 0.05)`, so
//! cell `(240, 240)` spans `[0, 0.05) × [0, 0.05)` and has centre
//! `(0.025, 0.025)`.
//!
//! On disk the grid is an 8-bit binary PGM (`P5`) with forward (+x) pointing
//! up and left (+y) pointing left: image row `479 − ix`, column `479 − iy`.
//! Pixel values: 0 empty, 128 occluded boundary, 255 visible boundary.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boundary::{BoundaryCloud, PointLabel, Provenance};
use crate::error::{Error, Result};
use crate::geometry::Point2;

pub type Point3 = [f64; 3];

/// Cells per side.
pub const GRID_SIZE: usize = 480;
/// Metres per cell.
pub const RESOLUTION: f64 = 0.05;
/// Half the side length of the region of interest, metres.
pub const ROI_HALF: f64 = 12.0;

/// Label held by a single raster cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[repr(u8)]
pub enum CellLabel {
    #[default]
    Empty = 0,
    OccludedBoundary = 128,
    VisibleBoundary = 255,
}

impl CellLabel {
    pub fn from_pixel(v: u8) -> Option<Self> {
        match v {
            0 => Some(CellLabel::Empty),
            128 => Some(CellLabel::OccludedBoundary),
            255 => Some(CellLabel::VisibleBoundary),
            _ => None,
        }
    }

    pub fn pixel(self) -> u8 {
        self as u8
    }

    pub fn is_boundary(self) -> bool {
        self != CellLabel::Empty
    }
}

/// Fixed-geometry vehicle-centred boundary raster.
#[derive(Clone, PartialEq, Eq)]
pub struct BevGrid {
    cells: Vec<CellLabel>,
}

impl std::fmt::Debug for BevGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BevGrid")
            .field("visible", &self.count(CellLabel::VisibleBoundary))
            .field("occluded", &self.count(CellLabel::OccludedBoundary))
            .finish()
    }
}

impl Default for BevGrid {
    fn default() -> Self {
        Self::new()
    }
}

impl BevGrid {
    pub fn new() -> Self {
        Self {
            cells: vec![CellLabel::Empty; GRID_SIZE * GRID_SIZE],
        }
    }

    /// Containing cell of a vehicle-frame point, or `None` outside the ROI
    /// (`|x| < 12` and `|y| < 12` are required).
    pub fn cell_of(p: Point2) -> Option<(usize, usize)> {
        if !(p[0].abs() < ROI_HALF && p[1].abs() < ROI_HALF) {
            return None;
        }
        let ix = (((p[0] + ROI_HALF) / RESOLUTION).floor() as usize).min(GRID_SIZE - 1);
        let iy = (((p[1] + ROI_HALF) / RESOLUTION).floor() as usize).min(GRID_SIZE - 1);
        Some((ix, iy))
    }

    /// Metric centre of a cell in the vehicle frame.
    pub fn cell_centre(ix: usize, iy: usize) -> Point2 {
        [
            -ROI_HALF + (ix as f64 + 0.5) * RESOLUTION,
            -ROI_HALF + (iy as f64 + 0.5) * RESOLUTION,
        ]
    }

    pub fn get(&self, ix: usize, iy: usize) -> CellLabel {
        self.cells[ix * GRID_SIZE + iy]
    }

    /// Overwrites a cell unconditionally.
    pub fn set(&mut self, ix: usize, iy: usize, label: CellLabel) {
        self.cells[ix * GRID_SIZE + iy] = label;
    }

    /// Marks a cell, keeping `VisibleBoundary` over `OccludedBoundary`.
    pub fn mark(&mut self, ix: usize, iy: usize, label: CellLabel) {
        let cell = &mut self.cells[ix * GRID_SIZE + iy];
        if label > *cell {
            *cell = label;
        }
    }

    /// Marks the cell containing `p`; returns false when `p` is outside the ROI.
    pub fn mark_point(&mut self, p: Point2, label: CellLabel) -> bool {
        match Self::cell_of(p) {
            Some((ix, iy)) => {
                self.mark(ix, iy, label);
                true
            }
            None => false,
        }
    }

    pub fn count(&self, label: CellLabel) -> usize {
        self.cells.iter().filter(|c| **c == label).count()
    }

    pub fn boundary_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_boundary()).count()
    }

    /// Non-empty cells in row-major `(ix, iy)` order.
    pub fn iter_boundary(&self) -> impl Iterator<Item = (usize, usize, CellLabel)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_boundary())
            .map(|(i, c)| (i / GRID_SIZE, i % GRID_SIZE, *c))
    }

    /// Copy with every occluded cell cleared.
    pub fn visible_only(&self) -> BevGrid {
        let cells = self
            .cells
            .iter()
            .map(|c| match c {
                CellLabel::OccludedBoundary => CellLabel::Empty,
                other => *other,
            })
            .collect();
        BevGrid { cells }
    }

    /// Binary PGM (`P5`) encoding.
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let header = format!("P5\n{GRID_SIZE} {GRID_SIZE}\n255\n");
        let mut out = Vec::with_capacity(header.len() + GRID_SIZE * GRID_SIZE);
        out.extend_from_slice(header.as_bytes());
        for row in 0..GRID_SIZE {
            let ix = GRID_SIZE - 1 - row;
            for col in 0..GRID_SIZE {
                let iy = GRID_SIZE - 1 - col;
                out.push(self.get(ix, iy).pixel());
            }
        }
        out
    }

    pub fn from_pgm_bytes(bytes: &[u8], path: &Path) -> Result<BevGrid> {
        let (fields, offset) = parse_pgm_header(bytes).map_err(|m| Error::format(path, m))?;
        if fields[0] != GRID_SIZE || fields[1] != GRID_SIZE || fields[2] != 255 {
            return Err(Error::format(
                path,
                format!(
                    "expected {GRID_SIZE}x{GRID_SIZE} maxval 255, got {}x{} maxval {}",
                    fields[0], fields[1], fields[2]
                ),
            ));
        }
        let data = &bytes[offset..];
        if data.len() != GRID_SIZE * GRID_SIZE {
            return Err(Error::format(
                path,
                format!("expected {} pixel bytes, got {}", GRID_SIZE * GRID_SIZE, data.len()),
            ));
        }
        let mut grid = BevGrid::new();
        for (i, v) in data.iter().enumerate() {
            let label = CellLabel::from_pixel(*v)
                .ok_or_else(|| Error::format(path, format!("invalid pixel value {v}")))?;
            let (row, col) = (i / GRID_SIZE, i % GRID_SIZE);
            grid.set(GRID_SIZE - 1 - row, GRID_SIZE - 1 - col, label);
        }
        Ok(grid)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_pgm_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_pgm(path: &Path) -> Result<BevGrid> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pgm_bytes(&bytes, path)
    }
}

/// Returns (width, height, maxval) and the offset of the pixel data.
fn parse_pgm_header(bytes: &[u8]) -> std::result::Result<([usize; 3], usize), String> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err("missing P5 magic".into());
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err("malformed header".into());
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| "header value overflow".to_string())?;
    }
    // exactly one whitespace byte before the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => Ok((fields, pos + 1)),
        _ => Err("missing raster separator".into()),
    }
}

/// Sidecar record written next to every PGM grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSidecar {
    pub timestamp: f64,
    pub resolution: f64,
    pub roi_width_m: f64,
    pub roi_height_m: f64,
    pub width_px: usize,
    pub height_px: usize,
    pub vehicle_centred: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl GridSidecar {
    pub fn new(timestamp: f64, provenance: Option<Provenance>) -> Self {
        Self {
            timestamp,
            resolution: RESOLUTION,
            roi_width_m: 2.0 * ROI_HALF,
            roi_height_m: 2.0 * ROI_HALF,
            width_px: GRID_SIZE,
            height_px: GRID_SIZE,
            vehicle_centred: true,
            provenance,
        }
    }

    pub fn check_geometry(&self, path: &Path) -> Result<()> {
        if self.width_px != GRID_SIZE
            || self.height_px != GRID_SIZE
            || self.resolution != RESOLUTION
            || !self.vehicle_centred
        {
            return Err(Error::format(path, "grid geometry does not match 480x480 @ 0.05 m"));
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("sidecar serialises");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let sidecar: GridSidecar =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        sidecar.check_geometry(path)?;
        Ok(sidecar)
    }
}

/// Height band (vehicle frame, ground ≈ 0) kept before projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightBand {
    z_min: f64,
    z_max: f64,
}

impl Default for HeightBand {
    fn default() -> Self {
        Self {
            z_min: -0.30,
            z_max: 0.30,
        }
    }
}

impl HeightBand {
    pub fn new(z_min: f64, z_max: f64) -> Result<Self> {
        if !(z_min < z_max) {
            return Err(Error::Domain(format!(
                "height band requires z_min < z_max, got [{z_min}, {z_max}]"
            )));
        }
        Ok(Self { z_min, z_max })
    }

    pub fn contains(&self, z: f64) -> bool {
        self.z_min <= z && z <= self.z_max
    }
}

/// Sensor-to-vehicle mount transform. Rotation is `Rz(yaw)·Ry(pitch)·Rx(roll)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Extrinsics6 {
    pub translation: [f64; 3],
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Extrinsics6 {
    pub fn identity() -> Self {
        Self::default()
    }

    fn rotation(&self) -> [[f64; 3]; 3] {
        let (sr, cr) = self.roll.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    }

    /// Maps a sensor-frame point into the vehicle frame.
    pub fn apply(&self, p: Point3) -> Point3 {
        let r = self.rotation();
        let t = self.translation;
        [
            r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + t[0],
            r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + t[1],
            r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + t[2],
        ]
    }
}

/// Keeps points inside the height band, preserving order.
pub fn trim_by_height(points: &[Point3], band: &HeightBand) -> Vec<Point3> {
    points.iter().copied().filter(|p| band.contains(p[2])).collect()
}

/// Rasterises vehicle-frame points with a single label. Points outside the
/// ROI are dropped.
pub fn project_to_bev(points: &[Point3], label: CellLabel) -> BevGrid {
    let mut grid = BevGrid::new();
    for p in points {
        grid.mark_point([p[0], p[1]], label);
    }
    grid
}

/// Brings both sensor clouds into the vehicle frame, trims and projects them
/// as visible boundary evidence.
pub fn fuse_dual_sensor(
    left: &[Point3],
    right: &[Point3],
    left_ext: &Extrinsics6,
    right_ext: &Extrinsics6,
    band: &HeightBand,
) -> BevGrid {
    let merged: Vec<Point3> = left
        .iter()
        .map(|p| left_ext.apply(*p))
        .chain(right.iter().map(|p| right_ext.apply(*p)))
        .collect();
    project_to_bev(&trim_by_height(&merged, band), CellLabel::VisibleBoundary)
}

/// Cell centres of boundary cells, in row-major order. Occluded cells are
/// emitted only when `include_occluded` is set.
pub fn grid_to_points(grid: &BevGrid, include_occluded: bool) -> BoundaryCloud {
    let mut cloud = BoundaryCloud::default();
    for (ix, iy, label) in grid.iter_boundary() {
        let point_label = match label {
            CellLabel::VisibleBoundary => PointLabel::Visible,
            CellLabel::OccludedBoundary if include_occluded => PointLabel::Occluded,
            _ => continue,
        };
        cloud.push(BevGrid::cell_centre(ix, iy), point_label);
    }
    cloud
}

/// Reads `x,y,z` rows (metres). A non-numeric first row is treated as a header.
pub fn read_points_csv(path: &Path) -> Result<Vec<Point3>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e))?;
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e))?;
        if record.len() != 3 {
            return Err(Error::format(path, format!("row {} has {} fields", i + 1, record.len())));
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) => points.push([v[0], v[1], v[2]]),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::format(path, format!("row {}: {e}", i + 1))),
        }
    }
    Ok(points)
}

/// Binary point stream: consecutive 12-byte records of three little-endian
/// `f32` values `(x, y, z)`.
pub fn read_points_bin(path: &Path) -> Result<Vec<Point3>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 12 != 0 {
        return Err(Error::format(
            path,
            format!("length {} is not a multiple of 12", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(12)
        .map(|c| {
            let f = |o: usize| f32::from_le_bytes([c[o], c[o + 1], c[o + 2], c[o + 3]]) as f64;
            [f(0), f(4), f(8)]
        })
        .collect())
}

pub fn write_points_bin(path: &Path, points: &[Point3]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in points {
        for v in p {
            w.write_all(&(*v as f32).to_le_bytes())
                .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    /// Independent rasteriser: image-style indices from the ROI corner,
    /// mapped back to storage indices.
    fn oracle_cells(points: &[Point3]) -> HashSet<(usize, usize)> {
        points
            .iter()
            .filter(|p| p[0] > -12.0 && p[0] < 12.0 && p[1] > -12.0 && p[1] < 12.0)
            .map(|p| {
                let row = ((12.0 - p[0]) / 0.05).floor() as i64;
                let col = ((12.0 - p[1]) / 0.05).floor() as i64;
                ((479 - row) as usize, (479 - col) as usize)
            })
            .collect()
    }

    #[test]
    fn geometry_is_24_metres() {
        assert_eq!(GRID_SIZE as f64 * RESOLUTION, 24.0);
        assert_eq!(2.0 * ROI_HALF, 24.0);
    }

    #[test]
    fn trim_examples() {
        let band = HeightBand::new(-0.3, 0.3).unwrap();
        assert_eq!(
            trim_by_height(&[[0.0, 0.0, 0.0], [0.0, 0.0, 5.0]], &band),
            vec![[0.0, 0.0, 0.0]]
        );
        assert!(trim_by_height(&[], &band).is_empty());
        assert!(HeightBand::new(0.3, 0.3).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point3> = (0..1000)
            .map(|_| [0.0, 0.0, rng.random_range(-1.0..1.0)])
            .collect();
        let brute = pts.iter().filter(|p| p[2] >= -0.3 && p[2] <= 0.3).count();
        let kept = trim_by_height(&pts, &band);
        assert_eq!(kept.len(), brute);
        assert!(kept.windows(2).all(|w| {
            let a = pts.iter().position(|p| p == &w[0]).unwrap();
            let b = pts.iter().position(|p| p == &w[1]).unwrap();
            a < b
        }));
    }

    #[test]
    fn projection_examples() {
        let g = project_to_bev(&[[0.0, 0.0, 0.0]], CellLabel::VisibleBoundary);
        assert_eq!(g.get(240, 240), CellLabel::VisibleBoundary);
        assert_eq!(g.boundary_count(), 1);
        let g = project_to_bev(&[[12.01, 0.0, 0.0]], CellLabel::VisibleBoundary);
        assert_eq!(g.boundary_count(), 0);
        let g = project_to_bev(&[[12.0, 0.0, 0.0]], CellLabel::VisibleBoundary);
        assert_eq!(g.boundary_count(), 0);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Point3> = (0..500)
            .map(|_| [rng.random_range(-11.99..11.99), rng.random_range(-11.99..11.99), 0.0])
            .collect();
        let g = project_to_bev(&pts, CellLabel::OccludedBoundary);
        let oracle = oracle_cells(&pts);
        assert_eq!(g.boundary_count(), oracle.len());
        for (ix, iy) in oracle {
            assert_eq!(g.get(ix, iy), CellLabel::OccludedBoundary);
        }
    }

    #[test]
    fn visible_wins_collisions() {
        let mut g = BevGrid::new();
        g.mark(1, 1, CellLabel::VisibleBoundary);
        g.mark(1, 1, CellLabel::OccludedBoundary);
        assert_eq!(g.get(1, 1), CellLabel::VisibleBoundary);
        g.mark(2, 2, CellLabel::OccludedBoundary);
        g.mark(2, 2, CellLabel::VisibleBoundary);
        assert_eq!(g.get(2, 2), CellLabel::VisibleBoundary);
    }

    #[test]
    fn fusion_examples() {
        let band = HeightBand::default();
        let id = Extrinsics6::identity();
        let left = vec![[1.0, 2.0, 0.0], [3.0, -4.0, 0.1]];
        let right = vec![[-5.0, 6.0, 0.0], [7.0, 7.0, 2.0]];
        let fused = fuse_dual_sensor(&left, &right, &id, &id, &band);
        let mut union = project_to_bev(&left, CellLabel::VisibleBoundary);
        for p in trim_by_height(&right, &band) {
            union.mark_point([p[0], p[1]], CellLabel::VisibleBoundary);
        }
        assert_eq!(fused, union);
        assert_eq!(
            fuse_dual_sensor(&left, &[], &id, &id, &band),
            project_to_bev(&left, CellLabel::VisibleBoundary)
        );

        let quarter = Extrinsics6 {
            yaw: std::f64::consts::FRAC_PI_2,
            ..Default::default()
        };
        let g = fuse_dual_sensor(&[[1.02, 0.01, 0.0]], &[], &quarter, &id, &band);
        // a quarter turn maps (x, y) to (-y, x)
        let expected = oracle_cells(&[[-0.01, 1.02, 0.0]]);
        assert_eq!(g.boundary_count(), 1);
        let (ix, iy) = *expected.iter().next().unwrap();
        assert_eq!(g.get(ix, iy), CellLabel::VisibleBoundary);
    }

    #[test]
    fn extrinsic_rotation_order() {
        // roll then pitch then yaw, intrinsic: Rz·Ry·Rx
        let e = Extrinsics6 {
            translation: [1.0, 2.0, 3.0],
            roll: std::f64::consts::FRAC_PI_2,
            pitch: 0.0,
            yaw: std::f64::consts::FRAC_PI_2,
        };
        let p = e.apply([0.0, 1.0, 0.0]);
        // Rx(90°): (0,1,0)→(0,0,1); Rz(90°) leaves z alone
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!((p[1] - 2.0).abs() < 1e-12);
        assert!((p[2] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn extraction_examples() {
        assert!(grid_to_points(&BevGrid::new(), true).is_empty());
        let mut g = BevGrid::new();
        g.set(240, 240, CellLabel::VisibleBoundary);
        let c = grid_to_points(&g, false);
        assert_eq!(c.points().len(), 1);
        assert!((c.points()[0][0] - 0.025).abs() < 1e-12);
        assert!((c.points()[0][1] - 0.025).abs() < 1e-12);
        // the point maps back to its own cell
        assert_eq!(BevGrid::cell_of(c.points()[0]), Some((240, 240)));

        g.set(10, 20, CellLabel::OccludedBoundary);
        assert_eq!(grid_to_points(&g, false).len(), 1);
        let full = grid_to_points(&g, true);
        assert_eq!(full.len(), 2);
        assert_eq!(full.labels()[0], PointLabel::Occluded);
    }

    #[test]
    fn pgm_layout_and_round_trip() {
        let mut g = BevGrid::new();
        g.set(479, 479, CellLabel::VisibleBoundary); // front-left corner
        g.set(0, 5, CellLabel::OccludedBoundary);
        let bytes = g.to_pgm_bytes();
        let header = b"P5\n480 480\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes[header.len()], 255);
        assert_eq!(bytes[header.len() + 479 * 480 + (479 - 5)], 128);
        let back = BevGrid::from_pgm_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, g);

        let mut bad = bytes.clone();
        bad[header.len() + 7] = 17;
        assert!(matches!(
            BevGrid::from_pgm_bytes(&bad, Path::new("mem")),
            Err(Error::Format { .. })
        ));
        let small = b"P5\n# comment\n2 2\n255\n\0\0\0\0";
        assert!(BevGrid::from_pgm_bytes(small, Path::new("mem")).is_err());
    }

    #[test]
    fn point_file_readers() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("pts.csv");
        fs::write(&csv_path, "x,y,z\n1.0,2.0,0.1\n-3.5, 4, -0.2\n").unwrap();
        assert_eq!(
            read_points_csv(&csv_path).unwrap(),
            vec![[1.0, 2.0, 0.1], [-3.5, 4.0, -0.2]]
        );
        fs::write(&csv_path, "1,2\n").unwrap();
        assert!(read_points_csv(&csv_path).is_err());

        let bin_path = dir.path().join("pts.bin");
        write_points_bin(&bin_path, &[[1.5, -2.25, 0.125]]).unwrap();
        assert_eq!(read_points_bin(&bin_path).unwrap(), vec![[1.5, -2.25, 0.125]]);
        fs::write(&bin_path, [0u8; 13]).unwrap();
        assert!(read_points_bin(&bin_path).is_err());
    }

    fn in_roi_points() -> impl Strategy<Value = Vec<Point3>> {
        prop::collection::vec((-11.999..11.999f64, -11.999..11.999f64), 0..200)
            .prop_map(|v| v.into_iter().map(|(x, y)| [x, y, 0.0]).collect())
    }

    proptest! {
        #[test]
        fn round_trip_within_half_cell(pts in in_roi_points()) {
            let cloud = grid_to_points(&project_to_bev(&pts, CellLabel::VisibleBoundary), false);
            for p in &pts {
                let near = cloud.points().iter().any(|q| {
                    (q[0] - p[0]).abs() <= 0.025 + 1e-12 && (q[1] - p[1]).abs() <= 0.025 + 1e-12
                });
                prop_assert!(near);
            }
        }

        #[test]
        fn projection_ignores_order(mut pts in in_roi_points(), seed in 0u64..1000) {
            let a = project_to_bev(&pts, CellLabel::VisibleBoundary);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::SliceRandom::shuffle(pts.as_mut_slice(), &mut rng);
            prop_assert_eq!(a, project_to_bev(&pts, CellLabel::VisibleBoundary));
        }

        #[test]
        fn identity_fusion_is_union(left in in_roi_points(), right in in_roi_points()) {
            let id = Extrinsics6::identity();
            let band = HeightBand::default();
            let all: Vec<Point3> = left.iter().chain(right.iter()).copied().collect();
            prop_assert_eq!(
                fuse_dual_sensor(&left, &right, &id, &id, &band),
                project_to_bev(&trim_by_height(&all, &band), CellLabel::VisibleBoundary)
            );
        }
    }
}
