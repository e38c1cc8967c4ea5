use super::delaunay::{self, DelaunayError};
use super::SupportPoint;
use crate::error::{Error, Result};
use crate::geometry::PixelCoord;
use crate::raster::Plane;

const GRID_CELL: usize = 16;

/// Delaunay mesh over support points plus four image-corner anchors, with a
/// disparity plane `d = a*u + b*v + c` per triangle.
#[derive(Clone, Debug)]
pub struct TriangulationPrior {
    vertices: Vec<SupportPoint>,
    /// Number of leading vertices that are real support points; the rest are anchors.
    support_count: usize,
    triangles: Vec<[usize; 3]>,
    planes: Vec<[f64; 3]>,
    width: usize,
    height: usize,
    cells_x: usize,
    cells: Vec<Vec<u32>>,
    index: SupportIndex,
}

/// Triangulates reference-view support points over a `width x height` image.
///
/// Corner anchors take the disparity of their nearest support point; a
/// corner already occupied by a support point gets no anchor.
pub fn triangulate(points: &[SupportPoint], width: usize, height: usize) -> Result<TriangulationPrior> {
    if points.is_empty() {
        return Err(Error::DegenerateSupport("no support points".into()));
    }
    if width < 2 || height < 2 {
        return Err(Error::DegenerateSupport(format!("all points collinear in a {width}x{height} image")));
    }
    let mut vertices: Vec<SupportPoint> = Vec::with_capacity(points.len() + 4);
    for p in points {
        if p.u < 0 || p.v < 0 || p.u as usize >= width || p.v as usize >= height {
            return Err(Error::DegenerateSupport(format!("support point ({}, {}) outside the image", p.u, p.v)));
        }
        if !(p.d.is_finite()) {
            return Err(Error::DegenerateSupport("non-finite support disparity".into()));
        }
        vertices.push(*p);
    }
    let support_count = vertices.len();
    let (w, h) = (width as i64 - 1, height as i64 - 1);
    for (cu, cv) in [(0, 0), (w, 0), (w, h), (0, h)] {
        if points.iter().any(|p| p.u == cu && p.v == cv) {
            continue;
        }
        let nearest = points
            .iter()
            .min_by_key(|p| (p.u - cu).pow(2) + (p.v - cv).pow(2))
            .expect("non-empty");
        vertices.push(SupportPoint::new(cu, cv, nearest.d, nearest.source_view));
    }

    let coords: Vec<[i64; 2]> = vertices.iter().map(|p| [p.u, p.v]).collect();
    let triangles = delaunay::triangulate(&coords).map_err(|e| match e {
        DelaunayError::Collinear => Error::DegenerateSupport("all points collinear".into()),
        other => Error::DegenerateSupport(other.to_string()),
    })?;

    let planes = triangles
        .iter()
        .map(|t| plane_through(t.map(|i| &vertices[i])))
        .collect();

    let cells_x = width.div_ceil(GRID_CELL);
    let cells_y = height.div_ceil(GRID_CELL);
    let mut cells = vec![Vec::new(); cells_x * cells_y];
    for (ti, t) in triangles.iter().enumerate() {
        let us = t.map(|i| vertices[i].u);
        let vs = t.map(|i| vertices[i].v);
        let (u0, u1) = (*us.iter().min().unwrap() as usize, *us.iter().max().unwrap() as usize);
        let (v0, v1) = (*vs.iter().min().unwrap() as usize, *vs.iter().max().unwrap() as usize);
        for cy in v0 / GRID_CELL..=v1 / GRID_CELL {
            for cx in u0 / GRID_CELL..=u1 / GRID_CELL {
                cells[cy * cells_x + cx].push(ti as u32);
            }
        }
    }

    let index = SupportIndex::new(&vertices[..support_count], width, height);
    Ok(TriangulationPrior {
        vertices,
        support_count,
        triangles,
        planes,
        width,
        height,
        cells_x,
        cells,
        index,
    })
}

fn plane_through([p0, p1, p2]: [&SupportPoint; 3]) -> [f64; 3] {
    let (u0, v0) = (p0.u as f64, p0.v as f64);
    let (du1, dv1, dd1) = (p1.u as f64 - u0, p1.v as f64 - v0, p1.d - p0.d);
    let (du2, dv2, dd2) = (p2.u as f64 - u0, p2.v as f64 - v0, p2.d - p0.d);
    let det = du1 * dv2 - du2 * dv1;
    let a = (dd1 * dv2 - dd2 * dv1) / det;
    let b = (dd2 * du1 - dd1 * du2) / det;
    [a, b, p0.d - a * u0 - b * v0]
}

impl TriangulationPrior {
    /// Mesh whose four corner anchors all carry disparity `d`.
    pub fn flat(d: f64, width: usize, height: usize) -> Result<Self> {
        let mut t = triangulate(&[SupportPoint::new(0, 0, d, 0)], width, height)?;
        t.support_count = 0;
        t.index = SupportIndex::new(&[], width, height);
        Ok(t)
    }

    pub fn vertices(&self) -> &[SupportPoint] {
        &self.vertices
    }

    /// The real support points (anchors excluded).
    pub fn support_points(&self) -> &[SupportPoint] {
        &self.vertices[..self.support_count]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn planes(&self) -> &[[f64; 3]] {
        &self.planes
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn support_index(&self) -> &SupportIndex {
        &self.index
    }

    /// Triangle containing `x` (points outside the image are clamped onto it).
    pub fn locate(&self, x: PixelCoord) -> usize {
        let u = x.u.clamp(0.0, (self.width - 1) as f64);
        let v = x.v.clamp(0.0, (self.height - 1) as f64);
        let cell = (v as usize / GRID_CELL) * self.cells_x + u as usize / GRID_CELL;
        let mut best = (f64::NEG_INFINITY, 0usize);
        for &ti in &self.cells[cell] {
            let m = self.min_barycentric(ti as usize, u, v);
            if m >= -1e-12 {
                return ti as usize;
            }
            if m > best.0 {
                best = (m, ti as usize);
            }
        }
        best.1
    }

    fn min_barycentric(&self, ti: usize, u: f64, v: f64) -> f64 {
        let [a, b, c] = self.triangles[ti].map(|i| (self.vertices[i].u as f64, self.vertices[i].v as f64));
        let area = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
        let l0 = ((b.0 - u) * (c.1 - v) - (b.1 - v) * (c.0 - u)) / area;
        let l1 = ((c.0 - u) * (a.1 - v) - (c.1 - v) * (a.0 - u)) / area;
        let l2 = 1.0 - l0 - l1;
        l0.min(l1).min(l2)
    }

    /// Interpolated prior mean at `x`.
    #[inline]
    pub fn interpolate_mu(&self, x: PixelCoord) -> f64 {
        let [a, b, c] = self.planes[self.locate(x)];
        a * x.u + b * x.v + c
    }

    /// Dense coarse disparity map `mu(x)` over the reference image.
    pub fn coarse_map(&self) -> Plane<f64> {
        Plane::par_from_fn(self.width, self.height, |x, y| {
            self.interpolate_mu(PixelCoord::new(x as f64, y as f64))
        })
    }

    /// OBJ-style dump: `v u v d` per vertex, `f i j k` (1-based) per triangle.
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for p in &self.vertices {
            s.push_str(&format!("v {} {} {:?}\n", p.u, p.v, p.d));
        }
        for t in &self.triangles {
            s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
        }
        s
    }
}

/// Bucket grid over support points for radius queries.
#[derive(Clone, Debug)]
pub struct SupportIndex {
    points: Vec<SupportPoint>,
    cell: usize,
    cells_x: usize,
    cells_y: usize,
    starts: Vec<u32>,
    order: Vec<u32>,
}

impl SupportIndex {
    pub fn new(points: &[SupportPoint], width: usize, height: usize) -> Self {
        let cell = GRID_CELL;
        let cells_x = width.div_ceil(cell).max(1);
        let cells_y = height.div_ceil(cell).max(1);
        let cell_of = |p: &SupportPoint| {
            let cx = (p.u.max(0) as usize / cell).min(cells_x - 1);
            let cy = (p.v.max(0) as usize / cell).min(cells_y - 1);
            cy * cells_x + cx
        };
        let mut counts = vec![0u32; cells_x * cells_y + 1];
        for p in points {
            counts[cell_of(p) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut order = vec![0u32; points.len()];
        for (i, p) in points.iter().enumerate() {
            let c = cell_of(p);
            order[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        SupportIndex {
            points: points.to_vec(),
            cell,
            cells_x,
            cells_y,
            starts: counts,
            order,
        }
    }

    pub fn points(&self) -> &[SupportPoint] {
        &self.points
    }

    /// Appends disparities of points within `radius` of `x` (index order).
    pub fn disparities_within(&self, x: PixelCoord, radius: f64, out: &mut Vec<f64>) {
        if self.points.is_empty() {
            return;
        }
        let r2 = radius * radius;
        let c = self.cell as f64;
        let cx0 = ((x.u - radius) / c).floor().max(0.0) as usize;
        let cy0 = ((x.v - radius) / c).floor().max(0.0) as usize;
        let cx1 = (((x.u + radius) / c).floor().max(0.0) as usize).min(self.cells_x - 1);
        let cy1 = (((x.v + radius) / c).floor().max(0.0) as usize).min(self.cells_y - 1);
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                let id = cy * self.cells_x + cx;
                for &pi in &self.order[self.starts[id] as usize..self.starts[id + 1] as usize] {
                    let p = &self.points[pi as usize];
                    let (du, dv) = (p.u as f64 - x.u, p.v as f64 - x.v);
                    if du * du + dv * dv <= r2 {
                        out.push(p.d);
                    }
                }
            }
        }
    }
}
