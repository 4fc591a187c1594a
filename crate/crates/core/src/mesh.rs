//! Uniform quadrilateral meshes of the unit square.
//!
//! Elements are numbered row-major from the bottom-left corner. Edges are
//! numbered bottom-up by rows: the horizontal edges on the line `y = y_j`
//! (left to right), then the vertical edges of element row `j` (left to
//! right), finishing with the horizontal edges of the top boundary.
//!
//! Every edge carries one global unit normal: `+x` on interior vertical
//! edges, `+y` on interior horizontal edges, and the outward normal of the
//! square on boundary edges. An element sees an edge with sign `+1` when its
//! outward normal agrees with the global one.

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Local sides, in the order used for all per-element edge lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn outward_normal(self) -> Point {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }

    pub fn is_horizontal(self) -> bool {
        matches!(self, Side::Bottom | Side::Top)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SideRef {
    pub edge: usize,
    pub side: Side,
    /// `+1` when the element's outward normal equals the edge normal.
    pub sign: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeAdjacency {
    pub element: usize,
    pub side: Side,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Start and end vertices; edges run left to right or bottom to top.
    pub vertices: [usize; 2],
    pub endpoints: [Point; 2],
    pub normal: Point,
    pub adjacency: Vec<EdgeAdjacency>,
    pub is_boundary: bool,
}

impl Edge {
    pub fn length(&self) -> f64 {
        let [a, b] = self.endpoints;
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }

    /// Point at parameter `t ∈ [0, 1]` from start to end.
    pub fn point(&self, t: f64) -> Point {
        let [a, b] = self.endpoints;
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub ix: usize,
    pub iy: usize,
    /// Bottom-left corner.
    pub origin: Point,
    pub size: [f64; 2],
    /// Corner vertices: bottom-left, bottom-right, top-right, top-left.
    pub vertices: [usize; 4],
    pub sides: [SideRef; 4],
}

impl Element {
    pub fn diameter(&self) -> f64 {
        self.size[0].max(self.size[1])
    }

    /// Maps reference coordinates in `[0,1]²` to physical ones.
    pub fn map(&self, xi: f64, eta: f64) -> Point {
        [
            self.origin[0] + xi * self.size[0],
            self.origin[1] + eta * self.size[1],
        ]
    }

    pub fn contains(&self, x: Point) -> bool {
        let eps = 1e-12;
        x[0] >= self.origin[0] - eps
            && x[0] <= self.origin[0] + self.size[0] + eps
            && x[1] >= self.origin[1] - eps
            && x[1] <= self.origin[1] + self.size[1] + eps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMesh {
    pub nx: usize,
    pub ny: usize,
    pub vertices: Vec<Point>,
    pub elements: Vec<Element>,
    pub edges: Vec<Edge>,
}

impl StructuredMesh {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        build_mesh(nx, ny)
    }

    pub fn h(&self) -> f64 {
        (1.0 / self.nx as f64).max(1.0 / self.ny as f64)
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| self.edges[e].is_boundary)
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| !self.edges[e].is_boundary)
    }

    /// Element containing `x`, preferring the lower-left one on shared boundaries.
    pub fn locate(&self, x: Point) -> Option<usize> {
        if !(0.0..=1.0).contains(&x[0]) || !(0.0..=1.0).contains(&x[1]) {
            return None;
        }
        let i = ((x[0] * self.nx as f64).floor() as usize).min(self.nx - 1);
        let j = ((x[1] * self.ny as f64).floor() as usize).min(self.ny - 1);
        Some(j * self.nx + i)
    }

    fn horizontal_edge(&self, i: usize, j: usize) -> usize {
        j * (2 * self.nx + 1) + i
    }

    fn vertical_edge(&self, i: usize, j: usize) -> usize {
        j * (2 * self.nx + 1) + self.nx + i
    }
}

pub fn build_mesh(nx: usize, ny: usize) -> Result<StructuredMesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput(format!(
            "mesh needs at least one element per direction, got {nx}x{ny}"
        )));
    }
    let (hx, hy) = (1.0 / nx as f64, 1.0 / ny as f64);
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let vertices: Vec<Point> = (0..=ny)
        .flat_map(|j| (0..=nx).map(move |i| [i as f64 * hx, j as f64 * hy]))
        .collect();

    let mut mesh = StructuredMesh {
        nx,
        ny,
        vertices,
        elements: Vec::with_capacity(nx * ny),
        edges: Vec::with_capacity(2 * nx * ny + nx + ny),
    };

    for j in 0..=ny {
        for i in 0..nx {
            let normal = match j {
                0 => [0.0, -1.0],
                _ => [0.0, 1.0],
            };
            let v = [vid(i, j), vid(i + 1, j)];
            mesh.edges.push(Edge {
                vertices: v,
                endpoints: [mesh.vertices[v[0]], mesh.vertices[v[1]]],
                normal,
                adjacency: Vec::with_capacity(2),
                is_boundary: j == 0 || j == ny,
            });
        }
        if j < ny {
            for i in 0..=nx {
                let normal = match i {
                    0 => [-1.0, 0.0],
                    _ => [1.0, 0.0],
                };
                let v = [vid(i, j), vid(i, j + 1)];
                mesh.edges.push(Edge {
                    vertices: v,
                    endpoints: [mesh.vertices[v[0]], mesh.vertices[v[1]]],
                    normal,
                    adjacency: Vec::with_capacity(2),
                    is_boundary: i == 0 || i == nx,
                });
            }
        }
    }

    for iy in 0..ny {
        for ix in 0..nx {
            let id = iy * nx + ix;
            let edges = [
                mesh.horizontal_edge(ix, iy),
                mesh.vertical_edge(ix + 1, iy),
                mesh.horizontal_edge(ix, iy + 1),
                mesh.vertical_edge(ix, iy),
            ];
            let mut sides = [SideRef {
                edge: 0,
                side: Side::Bottom,
                sign: 1,
            }; 4];
            for (k, side) in Side::ALL.into_iter().enumerate() {
                let e = edges[k];
                let n = side.outward_normal();
                let en = mesh.edges[e].normal;
                let sign = if n[0] * en[0] + n[1] * en[1] > 0.0 {
                    1
                } else {
                    -1
                };
                sides[k] = SideRef {
                    edge: e,
                    side,
                    sign,
                };
                mesh.edges[e].adjacency.push(EdgeAdjacency {
                    element: id,
                    side,
                    sign,
                });
            }
            mesh.elements.push(Element {
                ix,
                iy,
                origin: [ix as f64 * hx, iy as f64 * hy],
                size: [hx, hy],
                vertices: [
                    vid(ix, iy),
                    vid(ix + 1, iy),
                    vid(ix + 1, iy + 1),
                    vid(ix, iy + 1),
                ],
                sides,
            });
        }
    }
    Ok(mesh)
}

/// The four `(edge, side, sign)` incidences of an element, ordered
/// bottom, right, top, left.
pub fn element_edges(mesh: &StructuredMesh, element: usize) -> Result<[SideRef; 4]> {
    mesh.elements.get(element).map(|e| e.sides).ok_or_else(|| {
        Error::InvalidInput(format!(
            "element {element} out of range (mesh has {})",
            mesh.n_elements()
        ))
    })
}
