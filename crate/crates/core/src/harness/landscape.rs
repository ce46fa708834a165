//! Value landscape over the plane: min twin-critic value at the policy's
//! own action, per grid point, plus the action itself.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use super::svg::{ramp, Canvas};
use crate::actor::Actor;
use crate::error::{Error, Result};
use crate::numcore::Tensor;
use crate::trainer::Agent;

pub const MIN_RESOLUTION: usize = 50;
/// Local maxima closer than this are reported as one peak.
pub const PEAK_MERGE_RADIUS: f64 = 1.0;

const CHUNK: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct LandscapeGrid {
    pub resolution: usize,
    pub half_width: f64,
    /// Row-major in `y` then `x`: index `j·resolution + i`.
    pub q: Vec<f64>,
    pub actions: Vec<[f64; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub x: f64,
    pub y: f64,
    pub q: f64,
    /// Grid maxima merged into this peak.
    pub members: usize,
}

impl LandscapeGrid {
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + 2.0 * self.half_width * i as f64 / (self.resolution - 1) as f64
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        [self.coord(idx % self.resolution), self.coord(idx / self.resolution)]
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.resolution - 1) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,q,ax,ay\n");
        for (idx, (q, a)) in self.q.iter().zip(&self.actions).enumerate() {
            let [x, y] = self.point(idx);
            let _ = writeln!(out, "{x},{y},{q},{},{}", a[0], a[1]);
        }
        out
    }

    /// Heatmap of `q` with every `stride`-th action drawn as an arrow.
    pub fn to_svg(&self, goals: &[[f64; 2]], peaks: &[Peak]) -> Canvas {
        let hw = self.half_width;
        let mut c = Canvas::new(600.0, -hw, hw);
        let lo = self.q.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        for (idx, q) in self.q.iter().enumerate() {
            let [x, y] = self.point(idx);
            c.cell(x, y, self.spacing(), &ramp((q - lo) / span));
        }
        let stride = (self.resolution / 15).max(1);
        let len = 0.6 * self.spacing() * stride as f64;
        for j in (0..self.resolution).step_by(stride) {
            for i in (0..self.resolution).step_by(stride) {
                let a = self.actions[j * self.resolution + i];
                c.arrow(self.coord(i), self.coord(j), a[0] * len, a[1] * len, "black");
            }
        }
        for g in goals {
            c.circle(g[0], g[1], 5.0, "limegreen");
        }
        for p in peaks {
            c.circle(p.x, p.y, 3.0, "black");
        }
        c
    }
}

/// Fill a grid with `eval(states) → (actions, values)`, called on chunks of
/// grid points.
pub fn landscape_with<F>(resolution: usize, half_width: f64, mut eval: F) -> Result<LandscapeGrid>
where
    F: FnMut(&Tensor<f64>) -> Result<(Tensor<f64>, Vec<f64>)>,
{
    if resolution < MIN_RESOLUTION {
        return Err(Error::config(format!("grid resolution {resolution} is below {MIN_RESOLUTION}")));
    }
    let mut grid = LandscapeGrid {
        resolution,
        half_width,
        q: Vec::with_capacity(resolution * resolution),
        actions: Vec::with_capacity(resolution * resolution),
    };
    let total = resolution * resolution;
    let mut start = 0;
    while start < total {
        let end = (start + CHUNK).min(total);
        let states = Tensor::from_fn(end - start, 2, |r, c| grid.point(start + r)[c]);
        let (actions, q) = eval(&states)?;
        if actions.shape() != [end - start, 2] || q.len() != end - start {
            return Err(Error::dim("landscape evaluator returned the wrong shape"));
        }
        if q.iter().chain(actions.data()).any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("non-finite landscape value near {:?}", grid.point(start))));
        }
        grid.q.extend_from_slice(&q);
        grid.actions.extend(actions.to_rows().into_iter().map(|r| [r[0], r[1]]));
        start = end;
    }
    Ok(grid)
}

/// Grid points above all 8 neighbours (ties broken by lower index), merged
/// into peaks by single linkage within `merge_radius`. Sorted by value,
/// highest first.
pub fn detect_peaks(grid: &LandscapeGrid, merge_radius: f64) -> Vec<Peak> {
    let r = grid.resolution as isize;
    let beats = |a: usize, b: usize| grid.q[a] > grid.q[b] || (grid.q[a] == grid.q[b] && a < b);
    let mut maxima = Vec::new();
    for j in 0..r {
        for i in 0..r {
            let idx = (j * r + i) as usize;
            let mut is_max = true;
            for dj in -1..=1 {
                for di in -1..=1 {
                    let (ni, nj) = (i + di, j + dj);
                    if (di, dj) == (0, 0) || ni < 0 || nj < 0 || ni >= r || nj >= r {
                        continue;
                    }
                    is_max &= beats(idx, (nj * r + ni) as usize);
                }
            }
            if is_max {
                maxima.push(idx);
            }
        }
    }
    // Union-find over maxima.
    let mut parent: Vec<usize> = (0..maxima.len()).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for a in 0..maxima.len() {
        for b in a + 1..maxima.len() {
            let (pa, pb) = (grid.point(maxima[a]), grid.point(maxima[b]));
            if (pa[0] - pb[0]).hypot(pa[1] - pb[1]) <= merge_radius {
                let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut peaks: Vec<(usize, Peak)> = Vec::new();
    for (k, &idx) in maxima.iter().enumerate() {
        let rk = root(&mut parent, k);
        let [x, y] = grid.point(idx);
        match peaks.iter_mut().find(|(r, _)| *r == rk) {
            Some((_, p)) => {
                p.members += 1;
                if grid.q[idx] > p.q {
                    (p.x, p.y, p.q) = (x, y, grid.q[idx]);
                }
            }
            None => peaks.push((rk, Peak { x, y, q: grid.q[idx], members: 1 })),
        }
    }
    let mut peaks: Vec<Peak> = peaks.into_iter().map(|(_, p)| p).collect();
    peaks.sort_by(|a, b| b.q.total_cmp(&a.q));
    peaks
}

pub fn peaks_csv(peaks: &[Peak]) -> String {
    let mut out = String::from("peak,x,y,q,members\n");
    for (k, p) in peaks.iter().enumerate() {
        let _ = writeln!(out, "{k},{},{},{},{}", p.x, p.y, p.q, p.members);
    }
    out
}

/// Landscape of a two-dimensional agent. Actions are single eval-mode
/// samples. With `out_dir`, writes `landscape.csv`, `landscape.svg` and
/// `peaks.csv`.
pub fn export_q_landscape<R: Rng + ?Sized>(
    agent: &Agent,
    resolution: usize,
    goals: &[[f64; 2]],
    rng: &mut R,
    out_dir: Option<&Path>,
) -> Result<(LandscapeGrid, Vec<Peak>)> {
    if agent.state_dim() != 2 || agent.action_dim() != 2 {
        return Err(Error::dim("value landscapes need a planar state and action"));
    }
    let half_width = agent.config.multigoal_spec().half_width;
    let grid = landscape_with(resolution, half_width, |states| {
        let actions = agent.policy.act(states, rng)?;
        let q = agent.critic.min_q(states, &actions)?;
        Ok((actions, q))
    })?;
    let peaks = detect_peaks(&grid, PEAK_MERGE_RADIUS);
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("landscape.csv", grid.to_csv())?;
        write("peaks.csv", peaks_csv(&peaks))?;
        grid.to_svg(goals, &peaks).save(&dir.join("landscape.svg"))?;
    }
    Ok((grid, peaks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(resolution: usize, f: impl Fn(f64, f64) -> f64) -> LandscapeGrid {
        landscape_with(resolution, 7.0, |s| {
            let q = (0..s.rows()).map(|r| f(s.at(r, 0), s.at(r, 1))).collect();
            Ok((Tensor::zeros(&[s.rows(), 2]), q))
        })
        .unwrap()
    }

    #[test]
    fn single_bump() {
        let g = field(51, |x, y| -((x - 1.0).powi(2) + (y + 2.0).powi(2)));
        let p = detect_peaks(&g, PEAK_MERGE_RADIUS);
        assert_eq!(p.len(), 1);
        assert!((p[0].x - 1.0).abs() <= g.spacing() && (p[0].y + 2.0).abs() <= g.spacing());
    }

    #[test]
    fn flat_field_gives_one_peak() {
        let g = field(50, |_, _| 0.0);
        assert_eq!(detect_peaks(&g, PEAK_MERGE_RADIUS).len(), 1);
    }

    #[test]
    fn csv_rows_and_low_resolution() {
        let g = field(50, |x, _| x);
        assert_eq!(g.to_csv().lines().count(), 1 + 2500);
        assert!(landscape_with(49, 7.0, |_| unreachable!()).is_err());
    }
}
