//! Utility terrain over the projected 2D problem space: kernel-weighted
//! elevation from scored final designs, peak detection, and grid/image
//! export.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeographyError {
    #[error("no designs supplied")]
    EmptyDesigns,
    #[error("bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("design '{design_id}' has invalid scores: {detail}")]
    InvalidScores { design_id: String, detail: String },
    #[error("terrain has no unmasked cell")]
    AllMasked,
    #[error("terrain grid must be non-degenerate")]
    DegenerateGrid,
    #[error("grid file '{path}' is malformed: {detail}")]
    MalformedGrid { path: PathBuf, detail: String },
    #[error("i/o error on '{path}': {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A final design with its evaluation scores and projected location.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDesign {
    pub design_id: String,
    pub participant_id: String,
    pub group: usize,
    /// Location in the 2D projection space.
    pub point: [f64; 2],
    /// Per-evaluator Likert scores, each in [1, 5].
    pub scores: Vec<f64>,
    pub mean_score: f64,
}

impl ScoredDesign {
    pub fn new(
        design_id: impl Into<String>,
        participant_id: impl Into<String>,
        group: usize,
        point: [f64; 2],
        scores: Vec<f64>,
    ) -> Result<Self, GeographyError> {
        let design_id = design_id.into();
        if scores.is_empty() {
            return Err(GeographyError::InvalidScores {
                design_id,
                detail: "score list is empty".into(),
            });
        }
        if let Some(bad) = scores.iter().find(|s| !(1.0..=5.0).contains(*s)) {
            return Err(GeographyError::InvalidScores {
                design_id,
                detail: format!("score {bad} outside [1, 5]"),
            });
        }
        let mean_score = scores.iter().sum::<f64>() / scores.len() as f64;
        Ok(ScoredDesign {
            design_id,
            participant_id: participant_id.into(),
            group,
            point,
            scores,
            mean_score,
        })
    }
}

/// Grid geometry and smoothing parameters for [`build_terrain`].
#[derive(Debug, Clone)]
pub struct TerrainSpec {
    /// `(x_min, x_max, y_min, y_max)`; `None` takes the design bounding box
    /// expanded by 10% per side.
    pub extent: Option<(f64, f64, f64, f64)>,
    pub nx: usize,
    pub ny: usize,
    /// Gaussian kernel bandwidth; `None` takes 0.1 x the larger extent side.
    pub bandwidth: Option<f64>,
    /// Cells whose total kernel weight falls below this are masked out.
    pub weight_floor: f64,
}

impl Default for TerrainSpec {
    fn default() -> Self {
        TerrainSpec {
            extent: None,
            nx: 100,
            ny: 100,
            bandwidth: None,
            weight_floor: 1e-6,
        }
    }
}

/// Rectangular elevation grid with a validity mask. Cell `(row, col)` is
/// sampled at the cell center; row 0 sits at `y_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    elevation: Vec<f64>,
    mask: Vec<bool>,
}

impl TerrainGrid {
    /// Builds a grid by sampling `f` at every cell center; `None` marks a
    /// masked cell.
    pub fn from_fn(
        extent: (f64, f64, f64, f64),
        nx: usize,
        ny: usize,
        f: impl Fn(f64, f64) -> Option<f64>,
    ) -> Result<Self, GeographyError> {
        let (x_min, x_max, y_min, y_max) = extent;
        if nx == 0 || ny == 0 || !(x_max > x_min) || !(y_max > y_min) {
            return Err(GeographyError::DegenerateGrid);
        }
        let mut grid = TerrainGrid {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
            elevation: vec![f64::NAN; nx * ny],
            mask: vec![false; nx * ny],
        };
        for row in 0..ny {
            for col in 0..nx {
                let (cx, cy) = grid.cell_center(row, col);
                if let Some(e) = f(cx, cy) {
                    grid.elevation[row * nx + col] = e;
                    grid.mask[row * nx + col] = true;
                }
            }
        }
        Ok(grid)
    }

    /// Elevation of an unmasked cell, `None` where the terrain is undefined.
    pub fn elevation_at(&self, row: usize, col: usize) -> Option<f64> {
        let i = row * self.nx + col;
        self.mask[i].then(|| self.elevation[i])
    }

    pub fn is_defined(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.nx + col]
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let dx = (self.x_max - self.x_min) / self.nx as f64;
        let dy = (self.y_max - self.y_min) / self.ny as f64;
        (
            self.x_min + (col as f64 + 0.5) * dx,
            self.y_min + (row as f64 + 0.5) * dy,
        )
    }

    /// Cell whose center is nearest to the given point.
    pub fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let dx = (self.x_max - self.x_min) / self.nx as f64;
        let dy = (self.y_max - self.y_min) / self.ny as f64;
        let col = (((x - self.x_min) / dx - 0.5).round().max(0.0) as usize).min(self.nx - 1);
        let row = (((y - self.y_min) / dy - 0.5).round().max(0.0) as usize).min(self.ny - 1);
        (row, col)
    }

    /// Highest unmasked cell (first in row-major order on ties).
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for row in 0..self.ny {
            for col in 0..self.nx {
                if let Some(e) = self.elevation_at(row, col) {
                    if best.map_or(true, |(_, _, b)| e > b) {
                        best = Some((row, col, e));
                    }
                }
            }
        }
        best.map(|(r, c, _)| (r, c))
    }
}

/// One local maximum of the terrain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub row: usize,
    pub col: usize,
    pub elevation: f64,
}

/// Builds the utility terrain: each cell's elevation is the kernel-weighted
/// mean of design scores, `w_i = exp(-dist^2 / (2 bandwidth^2))`, masked
/// where the total weight falls below the floor.
pub fn build_terrain(
    designs: &[ScoredDesign],
    spec: &TerrainSpec,
) -> Result<TerrainGrid, GeographyError> {
    if designs.is_empty() {
        return Err(GeographyError::EmptyDesigns);
    }
    if spec.nx == 0 || spec.ny == 0 {
        return Err(GeographyError::DegenerateGrid);
    }
    if let Some(bw) = spec.bandwidth {
        if !(bw > 0.0) {
            return Err(GeographyError::InvalidBandwidth(bw));
        }
    }

    let (x_min, x_max, y_min, y_max) = match spec.extent {
        Some(extent) => extent,
        None => default_extent(designs),
    };
    if !(x_max > x_min) || !(y_max > y_min) {
        return Err(GeographyError::DegenerateGrid);
    }
    let bandwidth = spec
        .bandwidth
        .unwrap_or_else(|| 0.1 * (x_max - x_min).max(y_max - y_min));

    let grid = TerrainGrid {
        x_min,
        x_max,
        y_min,
        y_max,
        nx: spec.nx,
        ny: spec.ny,
        elevation: vec![f64::NAN; spec.nx * spec.ny],
        mask: vec![false; spec.nx * spec.ny],
    };
    let mut elevation = grid.elevation.clone();
    let mut mask = grid.mask.clone();
    let inv_two_bw2 = 1.0 / (2.0 * bandwidth * bandwidth);

    for row in 0..spec.ny {
        for col in 0..spec.nx {
            let (cx, cy) = grid.cell_center(row, col);
            let mut weight_total = 0.0;
            let mut weighted_score = 0.0;
            for d in designs {
                let dx = cx - d.point[0];
                let dy = cy - d.point[1];
                let w = (-(dx * dx + dy * dy) * inv_two_bw2).exp();
                weight_total += w;
                weighted_score += w * d.mean_score;
            }
            let i = row * spec.nx + col;
            if weight_total >= spec.weight_floor && weight_total > 0.0 {
                elevation[i] = weighted_score / weight_total;
                mask[i] = true;
            }
        }
    }

    Ok(TerrainGrid {
        elevation,
        mask,
        ..grid
    })
}

fn default_extent(designs: &[ScoredDesign]) -> (f64, f64, f64, f64) {
    let mut x_min = f64::MAX;
    let mut x_max = f64::MIN;
    let mut y_min = f64::MAX;
    let mut y_max = f64::MIN;
    for d in designs {
        x_min = x_min.min(d.point[0]);
        x_max = x_max.max(d.point[0]);
        y_min = y_min.min(d.point[1]);
        y_max = y_max.max(d.point[1]);
    }
    let pad = |lo: f64, hi: f64| {
        let width = hi - lo;
        let p = if width > 0.0 { 0.1 * width } else { 0.5 };
        (lo - p, hi + p)
    };
    let (x_min, x_max) = pad(x_min, x_max);
    let (y_min, y_max) = pad(y_min, y_max);
    (x_min, x_max, y_min, y_max)
}

/// Unmasked cells at least as high as all their unmasked 8-neighbors.
/// Equal-elevation plateaus report only their first row-major cell. Sorted
/// by elevation descending.
pub fn find_peaks(terrain: &TerrainGrid) -> Result<Vec<Peak>, GeographyError> {
    let (nx, ny) = (terrain.nx, terrain.ny);
    let mut candidate = vec![false; nx * ny];
    let mut any_defined = false;
    for row in 0..ny {
        for col in 0..nx {
            let Some(e) = terrain.elevation_at(row, col) else {
                continue;
            };
            any_defined = true;
            let mut is_peak = true;
            for (nr, nc) in neighbors8(row, col, ny, nx) {
                if let Some(ne) = terrain.elevation_at(nr, nc) {
                    if ne > e {
                        is_peak = false;
                        break;
                    }
                }
            }
            candidate[row * nx + col] = is_peak;
        }
    }
    if !any_defined {
        return Err(GeographyError::AllMasked);
    }

    // Flood equal-elevation plateaus so each reports a single cell.
    let mut visited = vec![false; nx * ny];
    let mut peaks = Vec::new();
    for row in 0..ny {
        for col in 0..nx {
            let i = row * nx + col;
            if !candidate[i] || visited[i] {
                continue;
            }
            let elevation = terrain.elevation_at(row, col).unwrap();
            let mut queue = vec![(row, col)];
            visited[i] = true;
            while let Some((r, c)) = queue.pop() {
                for (nr, nc) in neighbors8(r, c, ny, nx) {
                    let j = nr * nx + nc;
                    if candidate[j]
                        && !visited[j]
                        && terrain.elevation_at(nr, nc) == Some(elevation)
                    {
                        visited[j] = true;
                        queue.push((nr, nc));
                    }
                }
            }
            peaks.push(Peak {
                row,
                col,
                elevation,
            });
        }
    }

    peaks.sort_by(|a, b| {
        b.elevation
            .partial_cmp(&a.elevation)
            .unwrap()
            .then_with(|| (a.row, a.col).cmp(&(b.row, b.col)))
    });
    Ok(peaks)
}

fn neighbors8(
    row: usize,
    col: usize,
    ny: usize,
    nx: usize,
) -> impl Iterator<Item = (usize, usize)> {
    let r0 = row.saturating_sub(1);
    let c0 = col.saturating_sub(1);
    let r1 = (row + 1).min(ny - 1);
    let c1 = (col + 1).min(nx - 1);
    (r0..=r1)
        .flat_map(move |r| (c0..=c1).map(move |c| (r, c)))
        .filter(move |&(r, c)| (r, c) != (row, col))
}

/// Design with the highest mean score; ties go to the lowest design id.
pub fn best_design(designs: &[ScoredDesign]) -> Result<&ScoredDesign, GeographyError> {
    designs
        .iter()
        .reduce(|best, d| {
            if d.mean_score > best.mean_score
                || (d.mean_score == best.mean_score && d.design_id < best.design_id)
            {
                d
            } else {
                best
            }
        })
        .ok_or(GeographyError::EmptyDesigns)
}

/// Paths produced by [`export_terrain`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TerrainFiles {
    pub grid_path: PathBuf,
    pub image_path: PathBuf,
}

/// Writes `<base>.csv` (bit-exact grid) and `<base>.ppm` (heatmap with the
/// design points overlaid as markers).
pub fn export_terrain(
    terrain: &TerrainGrid,
    designs: &[ScoredDesign],
    base_path: &Path,
) -> Result<TerrainFiles, GeographyError> {
    let grid_path = PathBuf::from(format!("{}.csv", base_path.display()));
    let image_path = PathBuf::from(format!("{}.ppm", base_path.display()));

    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source: std::io::Error| GeographyError::Io {
            path: path.clone(),
            source,
        }
    };

    std::fs::write(&grid_path, grid_file_contents(terrain)).map_err(io_err(&grid_path))?;

    let mut image = std::io::BufWriter::new(
        std::fs::File::create(&image_path).map_err(io_err(&image_path))?,
    );
    render_ppm(terrain, designs, &mut image).map_err(io_err(&image_path))?;
    image.flush().map_err(io_err(&image_path))?;

    Ok(TerrainFiles {
        grid_path,
        image_path,
    })
}

fn format_value(v: f64) -> String {
    format!("{v:.8e}")
}

fn grid_file_contents(terrain: &TerrainGrid) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{},{},{},{},{},{}",
        format_value(terrain.x_min),
        format_value(terrain.x_max),
        format_value(terrain.y_min),
        format_value(terrain.y_max),
        terrain.nx,
        terrain.ny
    );
    for row in 0..terrain.ny {
        let line: Vec<String> = (0..terrain.nx)
            .map(|col| match terrain.elevation_at(row, col) {
                Some(e) => format_value(e),
                None => "NA".to_string(),
            })
            .collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

/// Reads a grid file written by [`export_terrain`].
pub fn load_terrain(path: &Path) -> Result<TerrainGrid, GeographyError> {
    let malformed = |detail: &str| GeographyError::MalformedGrid {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    };
    let text = std::fs::read_to_string(path).map_err(|source| GeographyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| malformed("missing header"))?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() != 6 {
        return Err(malformed("header must have 6 fields"));
    }
    let parse_f = |s: &str| s.parse::<f64>().map_err(|_| malformed("bad header number"));
    let parse_u = |s: &str| s.parse::<usize>().map_err(|_| malformed("bad header count"));
    let (x_min, x_max) = (parse_f(fields[0])?, parse_f(fields[1])?);
    let (y_min, y_max) = (parse_f(fields[2])?, parse_f(fields[3])?);
    let (nx, ny) = (parse_u(fields[4])?, parse_u(fields[5])?);
    if nx == 0 || ny == 0 {
        return Err(malformed("zero grid dimension"));
    }

    let mut elevation = Vec::with_capacity(nx * ny);
    let mut mask = Vec::with_capacity(nx * ny);
    for row in 0..ny {
        let line = lines
            .next()
            .ok_or_else(|| malformed(&format!("missing data row {row}")))?;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != nx {
            return Err(malformed(&format!("row {row} has {} cells", cells.len())));
        }
        for cell in cells {
            if cell == "NA" {
                elevation.push(f64::NAN);
                mask.push(false);
            } else {
                elevation.push(parse_f(cell)?);
                mask.push(true);
            }
        }
    }
    Ok(TerrainGrid {
        x_min,
        x_max,
        y_min,
        y_max,
        nx,
        ny,
        elevation,
        mask,
    })
}

const IMAGE_SCALE: usize = 4;

fn render_ppm(
    terrain: &TerrainGrid,
    designs: &[ScoredDesign],
    out: &mut impl std::io::Write,
) -> std::io::Result<()> {
    let width = terrain.nx * IMAGE_SCALE;
    let height = terrain.ny * IMAGE_SCALE;
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for r in 0..terrain.ny {
        for c in 0..terrain.nx {
            if let Some(e) = terrain.elevation_at(r, c) {
                lo = lo.min(e);
                hi = hi.max(e);
            }
        }
    }

    let mut pixels = vec![0u8; width * height * 3];
    for py in 0..height {
        // Image rows run top-down; terrain rows run bottom-up.
        let row = terrain.ny - 1 - py / IMAGE_SCALE;
        for px in 0..width {
            let col = px / IMAGE_SCALE;
            let rgb = match terrain.elevation_at(row, col) {
                Some(e) => {
                    let t = if hi > lo { (e - lo) / (hi - lo) } else { 0.5 };
                    let v = (40.0 + t * 215.0) as u8;
                    [v, v, v]
                }
                None => [225, 225, 235],
            };
            let i = (py * width + px) * 3;
            pixels[i..i + 3].copy_from_slice(&rgb);
        }
    }

    // Overlay design points as red markers.
    let span_x = terrain.x_max - terrain.x_min;
    let span_y = terrain.y_max - terrain.y_min;
    for d in designs {
        let fx = (d.point[0] - terrain.x_min) / span_x;
        let fy = (terrain.y_max - d.point[1]) / span_y;
        if !(0.0..=1.0).contains(&fx) || !(0.0..=1.0).contains(&fy) {
            continue;
        }
        let cx = ((fx * width as f64) as usize).min(width - 1);
        let cy = ((fy * height as f64) as usize).min(height - 1);
        for dy in -2i64..=2 {
            for dx in -2i64..=2 {
                let x = cx as i64 + dx;
                let y = cy as i64 + dy;
                if x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height {
                    let i = (y as usize * width + x as usize) * 3;
                    pixels[i..i + 3].copy_from_slice(&[220, 30, 30]);
                }
            }
        }
    }

    write!(out, "P6\n{width} {height}\n255\n")?;
    out.write_all(&pixels)
}
