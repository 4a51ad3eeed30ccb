//! Procedural obstacle terrain: a heightfield with a flat central platform
//! surrounded by randomly placed box obstacles.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Parameters of the discrete-obstacles terrain.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerrainParams {
    /// Maximum obstacle height, m.
    pub max_height: f64,
    pub num_obstacles: usize,
    /// Minimum obstacle edge length, m.
    pub min_size: f64,
    /// Maximum obstacle edge length, m.
    pub max_size: f64,
    /// Side length of the flat platform centered at the origin, m.
    pub platform_size: f64,
    /// Side length of the whole square grid, m.
    pub grid_size: f64,
    /// Heightfield cell size, m.
    pub cell_size: f64,
    /// Default friction coefficient.
    pub friction: f64,
}

impl Default for TerrainParams {
    fn default() -> Self {
        Self {
            max_height: 0.1,
            num_obstacles: 1500,
            min_size: 0.4,
            max_size: 2.0,
            platform_size: 5.0,
            grid_size: 20.0,
            cell_size: 0.05,
            friction: 0.8,
        }
    }
}

/// One axis-aligned box obstacle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub size: [f64; 2],
    pub height: f64,
}

/// Heightfield terrain. Heights are stored at grid nodes; queries bilinearly
/// interpolate and return 0 outside the grid.
#[derive(Debug, Clone)]
pub struct Terrain {
    /// Node heights, row-major: `heights[iy * nx + ix]`.
    pub heights: Vec<f64>,
    /// Nodes per side in x.
    pub nx: usize,
    /// Nodes per side in y.
    pub ny: usize,
    pub cell_size: f64,
    /// World coordinates of node (0, 0).
    pub origin: [f64; 2],
    pub friction: f64,
    pub obstacles: Vec<Obstacle>,
}

#[derive(Debug, Error)]
pub enum TerrainError {
    #[error("platform {platform} m does not fit in grid {grid} m")]
    PlatformTooLarge { platform: f64, grid: f64 },
    #[error("terrain parameters must be positive")]
    NonPositiveParams,
}

impl Terrain {
    /// Flat, unbounded terrain at height 0.
    pub fn flat(friction: f64) -> Self {
        Self {
            heights: vec![0.0; 4],
            nx: 2,
            ny: 2,
            cell_size: 1.0,
            origin: [-1.0, -1.0],
            friction,
            obstacles: Vec::new(),
        }
    }

    /// Bilinearly interpolated height at a world (x, y); 0 outside the grid.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        let fx = (x - self.origin[0]) / self.cell_size;
        let fy = (y - self.origin[1]) / self.cell_size;
        if fx < 0.0 || fy < 0.0 || fx > (self.nx - 1) as f64 || fy > (self.ny - 1) as f64 {
            return 0.0;
        }
        let ix = (fx.floor() as usize).min(self.nx - 2);
        let iy = (fy.floor() as usize).min(self.ny - 2);
        let wx = fx - ix as f64;
        let wy = fy - iy as f64;
        let h00 = self.heights[iy * self.nx + ix];
        let h10 = self.heights[iy * self.nx + ix + 1];
        let h01 = self.heights[(iy + 1) * self.nx + ix];
        let h11 = self.heights[(iy + 1) * self.nx + ix + 1];
        h00 * (1.0 - wx) * (1.0 - wy)
            + h10 * wx * (1.0 - wy)
            + h01 * (1.0 - wx) * wy
            + h11 * wx * wy
    }

    pub fn max_node_height(&self) -> f64 {
        self.heights.iter().fold(0.0f64, |m, &h| m.max(h))
    }

    /// Stamp one rectangular obstacle onto the grid (max composition, so
    /// overlapping obstacles keep the taller height).
    pub fn add_obstacle(&mut self, ob: Obstacle) {
        let x0 = ob.center[0] - ob.size[0] / 2.0;
        let x1 = ob.center[0] + ob.size[0] / 2.0;
        let y0 = ob.center[1] - ob.size[1] / 2.0;
        let y1 = ob.center[1] + ob.size[1] / 2.0;
        let ix0 = (((x0 - self.origin[0]) / self.cell_size).ceil().max(0.0)) as usize;
        let iy0 = (((y0 - self.origin[1]) / self.cell_size).ceil().max(0.0)) as usize;
        let ix1 = (((x1 - self.origin[0]) / self.cell_size).floor()) as usize;
        let iy1 = (((y1 - self.origin[1]) / self.cell_size).floor()) as usize;
        for iy in iy0..=iy1.min(self.ny - 1) {
            for ix in ix0..=ix1.min(self.nx - 1) {
                let h = &mut self.heights[iy * self.nx + ix];
                *h = h.max(ob.height);
            }
        }
        self.obstacles.push(ob);
    }

    /// Portable grid text export: header `cols rows cell_size origin_x
    /// origin_y`, then row-major node heights, one row per line.
    pub fn export_grid(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            self.nx, self.ny, self.cell_size, self.origin[0], self.origin[1]
        ));
        for iy in 0..self.ny {
            let row: Vec<String> = (0..self.nx)
                .map(|ix| format!("{}", self.heights[iy * self.nx + ix]))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Generate the discrete-obstacles terrain: a flat central platform with
/// `num_obstacles` axis-aligned rectangles of random size and height placed
/// outside the platform. Deterministic per seed.
pub fn generate_terrain(params: &TerrainParams, seed: u64) -> Result<Terrain, TerrainError> {
    if params.cell_size <= 0.0
        || params.grid_size <= 0.0
        || params.min_size <= 0.0
        || params.max_size < params.min_size
        || params.max_height <= 0.0
    {
        return Err(TerrainError::NonPositiveParams);
    }
    if params.platform_size >= params.grid_size {
        return Err(TerrainError::PlatformTooLarge {
            platform: params.platform_size,
            grid: params.grid_size,
        });
    }
    let n = (params.grid_size / params.cell_size).round() as usize + 1;
    let half = params.grid_size / 2.0;
    let mut terrain = Terrain {
        heights: vec![0.0; n * n],
        nx: n,
        ny: n,
        cell_size: params.cell_size,
        origin: [-half, -half],
        friction: params.friction,
        obstacles: Vec::with_capacity(params.num_obstacles),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half_platform = params.platform_size / 2.0;
    let mut placed = 0;
    while placed < params.num_obstacles {
        let cx = rng.gen_range(-half..half);
        let cy = rng.gen_range(-half..half);
        let sx = rng.gen_range(params.min_size..=params.max_size);
        let sy = rng.gen_range(params.min_size..=params.max_size);
        // Reject rectangles that would intrude on the platform.
        if cx.abs() - sx / 2.0 < half_platform && cy.abs() - sy / 2.0 < half_platform {
            continue;
        }
        // gen::<f64>() is in [0, 1), so the height lands in (0, max_height].
        let h = params.max_height * (1.0 - rng.gen::<f64>());
        terrain.add_obstacle(Obstacle { center: [cx, cy], size: [sx, sy], height: h });
        placed += 1;
    }
    Ok(terrain)
}
