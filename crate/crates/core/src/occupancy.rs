//! 2D occupancy grid, PGM+YAML loading, and graph validity scoring.
//!
//! Cells are trinary; unknown counts as non-traversable. Edge checks walk
//! the supercover of the segment (every cell it geometrically touches,
//! corner grazes included), which is conservative next to a sampled
//! point-marching test.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::topomap::TopoGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Free,
    Occupied,
    Unknown,
}

/// World-anchored trinary raster. Row 0 is the minimum-y row; the loader
/// flips PGM storage so world +Y points up the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    /// Meters per cell.
    pub resolution: f64,
    /// World coordinates of the corner of cell (0, 0).
    pub origin: [f64; 2],
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Cell>,
    pub free_thresh: f64,
    pub occ_thresh: f64,
}

impl OccupancyGrid {
    pub fn new(
        resolution: f64,
        origin: [f64; 2],
        width: usize,
        height: usize,
        cells: Vec<Cell>,
    ) -> Result<Self> {
        if resolution <= 0.0 {
            return Err(Error::invalid("occupancy resolution", "must be > 0"));
        }
        if cells.len() != width * height || cells.is_empty() {
            return Err(Error::invalid("occupancy cells", "must fill width x height"));
        }
        Ok(OccupancyGrid {
            resolution,
            origin,
            width,
            height,
            cells,
            free_thresh: 0.196,
            occ_thresh: 0.65,
        })
    }

    #[inline]
    pub fn cell(&self, col: i64, row: i64) -> Cell {
        if col < 0 || row < 0 || col >= self.width as i64 || row >= self.height as i64 {
            return Cell::Unknown;
        }
        self.cells[row as usize * self.width + col as usize]
    }

    /// Grid cell containing a world point.
    pub fn world_to_cell(&self, x: f64, y: f64) -> (i64, i64) {
        (
            ((x - self.origin[0]) / self.resolution).floor() as i64,
            ((y - self.origin[1]) / self.resolution).floor() as i64,
        )
    }

    pub fn is_free_at(&self, x: f64, y: f64) -> bool {
        let (c, r) = self.world_to_cell(x, y);
        self.cell(c, r) == Cell::Free
    }
}

/// Parse a binary (P5) PGM: returns (width, height, maxval, bytes).
fn parse_pgm(bytes: &[u8], path: &str) -> Result<(usize, usize, u16, Vec<u8>)> {
    let mut pos = 0usize;
    let mut line_no = 1usize;
    let err = |line: usize, msg: &str| Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.to_string(),
    };

    // Token reader skipping whitespace and '#' comments.
    let next_token = |pos: &mut usize, line_no: &mut usize| -> Result<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                if bytes[*pos] == b'\n' {
                    *line_no += 1;
                }
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(err(*line_no, "unexpected end of header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };

    let magic = next_token(&mut pos, &mut line_no)?;
    if magic != "P5" {
        return Err(err(line_no, "expected binary PGM magic P5"));
    }
    let width: usize = next_token(&mut pos, &mut line_no)?
        .parse()
        .map_err(|_| err(line_no, "bad width"))?;
    let height: usize = next_token(&mut pos, &mut line_no)?
        .parse()
        .map_err(|_| err(line_no, "bad height"))?;
    let maxval: u16 = next_token(&mut pos, &mut line_no)?
        .parse()
        .map_err(|_| err(line_no, "bad maxval"))?;
    if maxval == 0 || maxval > 255 {
        return Err(err(line_no, "maxval must be in 1..=255"));
    }
    // Exactly one whitespace byte separates header and raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(err(line_no, "missing raster separator"));
    }
    pos += 1;
    let need = width * height;
    if bytes.len() - pos < need {
        return Err(err(line_no, "raster shorter than width * height"));
    }
    Ok((width, height, maxval, bytes[pos..pos + need].to_vec()))
}

#[derive(Debug, Default)]
struct MapYaml {
    image: String,
    resolution: f64,
    origin: [f64; 3],
    negate: bool,
    occupied_thresh: f64,
    free_thresh: f64,
}

/// Minimal parser for the fixed map-metadata YAML schema.
fn parse_map_yaml(text: &str, path: &str) -> Result<MapYaml> {
    let mut out = MapYaml {
        occupied_thresh: 0.65,
        free_thresh: 0.196,
        resolution: 0.05,
        ..MapYaml::default()
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_string(),
            line: idx + 1,
            msg,
        };
        let Some((key, value)) = line.split_once(':') else {
            return Err(err(format!("expected key: value, got {line:?}")));
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "image" => out.image = value.to_string(),
            "resolution" => {
                out.resolution = value
                    .parse()
                    .map_err(|_| err(format!("bad resolution {value:?}")))?
            }
            "origin" => {
                let inner = value
                    .trim_start_matches('[')
                    .trim_end_matches(']')
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<f64>, _>>()
                    .map_err(|_| err(format!("bad origin {value:?}")))?;
                if inner.len() < 2 {
                    return Err(err("origin needs at least [x, y]".into()));
                }
                out.origin = [inner[0], inner[1], *inner.get(2).unwrap_or(&0.0)];
            }
            "negate" => out.negate = value == "1" || value == "true",
            "occupied_thresh" => {
                out.occupied_thresh = value
                    .parse()
                    .map_err(|_| err(format!("bad occupied_thresh {value:?}")))?
            }
            "free_thresh" => {
                out.free_thresh = value
                    .parse()
                    .map_err(|_| err(format!("bad free_thresh {value:?}")))?
            }
            _ => {} // Unknown keys are ignored.
        }
    }
    if out.image.is_empty() {
        return Err(Error::Parse {
            path: path.to_string(),
            line: 0,
            msg: "missing image field".into(),
        });
    }
    Ok(out)
}

/// Load a PGM+YAML occupancy map.
///
/// Classification per pixel value p (flipped first when negate is set):
/// free when p/maxval >= 1 - free_thresh, occupied when p/maxval <=
/// occ_thresh, unknown otherwise. Rows are flipped so row 0 sits at the
/// world origin corner.
pub fn load_occupancy(pgm_path: &Path, yaml_path: &Path) -> Result<OccupancyGrid> {
    let yaml_text = std::fs::read_to_string(yaml_path)
        .map_err(|e| Error::io(yaml_path.display().to_string(), e))?;
    let meta = parse_map_yaml(&yaml_text, &yaml_path.display().to_string())?;
    let pgm_bytes =
        std::fs::read(pgm_path).map_err(|e| Error::io(pgm_path.display().to_string(), e))?;
    let (width, height, maxval, raster) =
        parse_pgm(&pgm_bytes, &pgm_path.display().to_string())?;

    let mut cells = vec![Cell::Unknown; width * height];
    for pgm_row in 0..height {
        for col in 0..width {
            let mut p = raster[pgm_row * width + col] as f64;
            if meta.negate {
                p = maxval as f64 - p;
            }
            let v = p / maxval as f64;
            let cell = if v >= 1.0 - meta.free_thresh {
                Cell::Free
            } else if v <= meta.occupied_thresh {
                Cell::Occupied
            } else {
                Cell::Unknown
            };
            // PGM row 0 is the top of the image = maximum world y.
            let row = height - 1 - pgm_row;
            cells[row * width + col] = cell;
        }
    }
    let mut grid = OccupancyGrid::new(
        meta.resolution,
        [meta.origin[0], meta.origin[1]],
        width,
        height,
        cells,
    )?;
    grid.free_thresh = meta.free_thresh;
    grid.occ_thresh = meta.occupied_thresh;
    Ok(grid)
}

/// A node is valid when its (x, y) cell is free; out of bounds or unknown
/// cells fail.
pub fn node_valid(position: Vec3, grid: &OccupancyGrid) -> bool {
    grid.is_free_at(position.x, position.y)
}

/// Supercover of a segment in cell coordinates: every cell the segment
/// touches, including all four cells around a crossed lattice corner.
pub fn supercover_cells(grid: &OccupancyGrid, a: (f64, f64), b: (f64, f64)) -> Vec<(i64, i64)> {
    // Work in continuous cell coordinates.
    let ax = (a.0 - grid.origin[0]) / grid.resolution;
    let ay = (a.1 - grid.origin[1]) / grid.resolution;
    let bx = (b.0 - grid.origin[0]) / grid.resolution;
    let by = (b.1 - grid.origin[1]) / grid.resolution;

    let mut cells = BTreeSet::new();
    let (mut cx, mut cy) = (ax.floor() as i64, ay.floor() as i64);
    let (ex, ey) = (bx.floor() as i64, by.floor() as i64);
    cells.insert((cx, cy));

    let dx = bx - ax;
    let dy = by - ay;
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };

    // Parametric distance to the next vertical / horizontal grid line.
    let mut t_max_x = if dx != 0.0 {
        let next = if dx > 0.0 { cx as f64 + 1.0 } else { cx as f64 };
        (next - ax) / dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy != 0.0 {
        let next = if dy > 0.0 { cy as f64 + 1.0 } else { cy as f64 };
        (next - ay) / dy
    } else {
        f64::INFINITY
    };
    let t_delta_x = if dx != 0.0 { (1.0 / dx).abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { (1.0 / dy).abs() } else { f64::INFINITY };

    let mut guard = 0usize;
    let limit = 4 * (grid.width + grid.height) + (dx.abs() + dy.abs()) as usize * 4 + 16;
    while (cx, cy) != (ex, ey) && guard < limit {
        guard += 1;
        if t_max_x > 1.0 && t_max_y > 1.0 {
            break;
        }
        if t_max_x < t_max_y {
            cx += step_x;
            t_max_x += t_delta_x;
        } else if t_max_y < t_max_x {
            cy += step_y;
            t_max_y += t_delta_y;
        } else {
            // Exact corner crossing: the segment touches both side cells
            // and the diagonal.
            cells.insert((cx + step_x, cy));
            cells.insert((cx, cy + step_y));
            cx += step_x;
            cy += step_y;
            t_max_x += t_delta_x;
            t_max_y += t_delta_y;
        }
        cells.insert((cx, cy));
    }
    cells.insert((ex, ey));
    cells.into_iter().collect()
}

/// An edge is valid when both endpoints are valid and every supercover
/// cell between them is free.
pub fn edge_valid(a: Vec3, b: Vec3, grid: &OccupancyGrid) -> bool {
    if !node_valid(a, grid) || !node_valid(b, grid) {
        return false;
    }
    supercover_cells(grid, (a.x, a.y), (b.x, b.y))
        .into_iter()
        .all(|(cx, cy)| grid.cell(cx, cy) == Cell::Free)
}

/// Table of node/edge validity counts and offenders.
#[derive(Clone, Debug, Serialize)]
pub struct ValidityReport {
    pub node_valid_count: usize,
    pub node_total: usize,
    pub edge_valid_count: usize,
    pub edge_total: usize,
    pub node_ratio: f64,
    pub edge_ratio: f64,
    pub invalid_node_ids: Vec<u32>,
    pub invalid_edges: Vec<[u32; 2]>,
}

/// Score every node and edge of a graph against the grid. Ratios over an
/// empty set are reported as 1.0 (vacuously valid).
pub fn validity_report(graph: &TopoGraph, grid: &OccupancyGrid) -> ValidityReport {
    let mut invalid_node_ids = Vec::new();
    for n in &graph.nodes {
        if !node_valid(n.position, grid) {
            invalid_node_ids.push(n.node_id);
        }
    }
    let mut invalid_edges = Vec::new();
    for &(a, b) in &graph.edges {
        let pa = graph.nodes[a as usize].position;
        let pb = graph.nodes[b as usize].position;
        if !edge_valid(pa, pb, grid) {
            invalid_edges.push([a, b]);
        }
    }
    let node_total = graph.nodes.len();
    let edge_total = graph.edges.len();
    let node_valid_count = node_total - invalid_node_ids.len();
    let edge_valid_count = edge_total - invalid_edges.len();
    ValidityReport {
        node_valid_count,
        node_total,
        edge_valid_count,
        edge_total,
        node_ratio: if node_total == 0 {
            1.0
        } else {
            node_valid_count as f64 / node_total as f64
        },
        edge_ratio: if edge_total == 0 {
            1.0
        } else {
            edge_valid_count as f64 / edge_total as f64
        },
        invalid_node_ids,
        invalid_edges,
    }
}
