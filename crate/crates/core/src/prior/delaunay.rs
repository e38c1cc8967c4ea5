//! Incremental Bowyer–Watson Delaunay triangulation on integer points.
//!
//! Predicates are evaluated exactly in `i128`. A point lying exactly on a
//! circumcircle does not invalidate that triangle, so cocircular ties resolve
//! by insertion order and every emitted triangle satisfies the closed
//! empty-circumcircle property.
//!
//! The point set must contain the four corners of its own bounding box. The
//! triangulation starts from those corners, so every later insertion lies in
//! the current hull and no super-triangle is needed.

use std::collections::{HashMap, HashSet};

/// Coordinates must stay within `±COORD_LIMIT` for the `i128` predicates to be exact.
pub const COORD_LIMIT: i64 = 1 << 24;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DelaunayError {
    /// All points lie on one line (or there are fewer than three).
    Collinear,
    /// A corner of the bounding box is not among the points.
    MissingCorner([i64; 2]),
    CoordinateRange([i64; 2]),
}

impl std::fmt::Display for DelaunayError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DelaunayError::Collinear => write!(f, "all points are collinear"),
            DelaunayError::MissingCorner(c) => write!(f, "bounding-box corner {c:?} is not a vertex"),
            DelaunayError::CoordinateRange(c) => write!(f, "point {c:?} exceeds the coordinate limit"),
        }
    }
}

impl std::error::Error for DelaunayError {}

/// Twice the signed area of `(a, b, c)`; positive when counter-clockwise.
#[inline]
pub fn orient(a: [i64; 2], b: [i64; 2], c: [i64; 2]) -> i128 {
    let (abx, aby) = ((b[0] - a[0]) as i128, (b[1] - a[1]) as i128);
    let (acx, acy) = ((c[0] - a[0]) as i128, (c[1] - a[1]) as i128);
    abx * acy - aby * acx
}

/// Positive iff `d` lies strictly inside the circumcircle of the
/// counter-clockwise triangle `(a, b, c)`.
#[inline]
pub fn incircle(a: [i64; 2], b: [i64; 2], c: [i64; 2], d: [i64; 2]) -> i128 {
    let (adx, ady) = ((a[0] - d[0]) as i128, (a[1] - d[1]) as i128);
    let (bdx, bdy) = ((b[0] - d[0]) as i128, (b[1] - d[1]) as i128);
    let (cdx, cdy) = ((c[0] - d[0]) as i128, (c[1] - d[1]) as i128);
    let alift = adx * adx + ady * ady;
    let blift = bdx * bdx + bdy * bdy;
    let clift = cdx * cdx + cdy * cdy;
    alift * (bdx * cdy - cdx * bdy) - blift * (adx * cdy - cdx * ady) + clift * (adx * bdy - bdx * ady)
}

#[derive(Clone, Copy, Debug)]
struct Tri {
    v: [usize; 3],
    // n[i] is the neighbor across the edge opposite v[i]
    n: [usize; 3],
    alive: bool,
}

/// Triangulates `points`; returns counter-clockwise index triples.
///
/// Duplicate points are ignored (the first occurrence is used).
pub fn triangulate(points: &[[i64; 2]]) -> Result<Vec<[usize; 3]>, DelaunayError> {
    if points.len() < 3 {
        return Err(DelaunayError::Collinear);
    }
    for &p in points {
        if p[0].abs() > COORD_LIMIT || p[1].abs() > COORD_LIMIT {
            return Err(DelaunayError::CoordinateRange(p));
        }
    }
    let xmin = points.iter().map(|p| p[0]).min().unwrap();
    let xmax = points.iter().map(|p| p[0]).max().unwrap();
    let ymin = points.iter().map(|p| p[1]).min().unwrap();
    let ymax = points.iter().map(|p| p[1]).max().unwrap();
    let p0 = points[0];
    let spans_plane = points.iter().find(|&&p| p != p0).is_some_and(|&p1| {
        points.iter().any(|&q| orient(p0, p1, q) != 0)
    });
    if !spans_plane {
        return Err(DelaunayError::Collinear);
    }

    let mut first_at: HashMap<[i64; 2], usize> = HashMap::with_capacity(points.len());
    for (i, &p) in points.iter().enumerate() {
        first_at.entry(p).or_insert(i);
    }
    let corner_ids: Vec<usize> = [[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]]
        .iter()
        .map(|c| first_at.get(c).copied().ok_or(DelaunayError::MissingCorner(*c)))
        .collect::<Result<_, _>>()?;

    let mut mesh = Mesh {
        pts: points,
        tris: Vec::with_capacity(2 * points.len() + 2),
        last: 0,
    };
    let [c0, c1, c2, c3] = [corner_ids[0], corner_ids[1], corner_ids[2], corner_ids[3]];
    mesh.tris.push(Tri {
        v: [c0, c1, c2],
        n: [NONE, 1, NONE],
        alive: true,
    });
    mesh.tris.push(Tri {
        v: [c0, c2, c3],
        n: [NONE, NONE, 0],
        alive: true,
    });

    for (i, &p) in points.iter().enumerate() {
        if first_at[&p] != i || corner_ids.contains(&i) {
            continue;
        }
        mesh.insert(i);
    }

    Ok(mesh.tris.iter().filter(|t| t.alive).map(|t| t.v).collect())
}

struct Mesh<'a> {
    pts: &'a [[i64; 2]],
    tris: Vec<Tri>,
    last: usize,
}

impl Mesh<'_> {
    /// Visibility walk to a triangle containing `p` (closed).
    fn locate(&self, p: [i64; 2]) -> usize {
        let mut t = self.last;
        if !self.tris[t].alive {
            t = self.tris.iter().rposition(|t| t.alive).expect("mesh is never empty");
        }
        let mut steps = 0usize;
        'walk: loop {
            let tri = &self.tris[t];
            for i in 0..3 {
                let a = self.pts[tri.v[(i + 1) % 3]];
                let b = self.pts[tri.v[(i + 2) % 3]];
                if orient(a, b, p) < 0 && tri.n[i] != NONE {
                    t = tri.n[i];
                    steps += 1;
                    debug_assert!(steps <= self.tris.len() * 4, "walk did not terminate");
                    continue 'walk;
                }
            }
            return t;
        }
    }

    fn in_circle(&self, t: usize, p: [i64; 2]) -> bool {
        let v = self.tris[t].v;
        incircle(self.pts[v[0]], self.pts[v[1]], self.pts[v[2]], p) > 0
    }

    fn insert(&mut self, pi: usize) {
        let p = self.pts[pi];
        let seed = self.locate(p);

        // conflict region: connected set of triangles whose circumcircle strictly contains p
        let mut cavity = vec![seed];
        let mut in_cavity = HashSet::from([seed]);
        let mut k = 0;
        while k < cavity.len() {
            let t = cavity[k];
            k += 1;
            for i in 0..3 {
                let nb = self.tris[t].n[i];
                if nb != NONE && !in_cavity.contains(&nb) && self.in_circle(nb, p) {
                    in_cavity.insert(nb);
                    cavity.push(nb);
                }
            }
        }

        // boundary edges (a, b) in cavity orientation, with their outer neighbor
        let mut boundary = Vec::new();
        for &t in &cavity {
            let tri = self.tris[t];
            for i in 0..3 {
                let nb = tri.n[i];
                if nb == NONE || !in_cavity.contains(&nb) {
                    boundary.push((tri.v[(i + 1) % 3], tri.v[(i + 2) % 3], nb, t));
                }
            }
        }
        for &t in &cavity {
            self.tris[t].alive = false;
        }

        let mut by_first: HashMap<usize, usize> = HashMap::with_capacity(boundary.len());
        let mut by_second: HashMap<usize, usize> = HashMap::with_capacity(boundary.len());
        let mut created = Vec::with_capacity(boundary.len());
        for (a, b, outer, dead) in boundary {
            if orient(self.pts[a], self.pts[b], p) == 0 {
                // p splits a hull edge
                debug_assert_eq!(outer, NONE);
                continue;
            }
            let id = self.tris.len();
            self.tris.push(Tri {
                v: [a, b, pi],
                n: [NONE, NONE, outer],
                alive: true,
            });
            if outer != NONE {
                let o = &mut self.tris[outer];
                for slot in o.n.iter_mut() {
                    if *slot == dead {
                        *slot = id;
                    }
                }
            }
            by_first.insert(a, id);
            by_second.insert(b, id);
            created.push(id);
        }
        for &id in &created {
            let [a, b, _] = self.tris[id].v;
            // edge (b, p) is shared with the new triangle starting at b
            self.tris[id].n[0] = by_first.get(&b).copied().unwrap_or(NONE);
            // edge (p, a) is shared with the new triangle ending at a
            self.tris[id].n[1] = by_second.get(&a).copied().unwrap_or(NONE);
        }
        if let Some(&last) = created.last() {
            self.last = last;
        }
    }
}
