//! Icosphere generation: a subdivided icosahedron projected onto the unit
//! sphere. Gives closed, near-uniform triangle meshes with
//! n = 10·4^s + 2 vertices, a desk-scale stand-in for large scanned meshes.

use super::{DegeneratePolicy, TriMesh};
use std::collections::HashMap;

/// Unit icosphere with `subdivisions` rounds of 1-to-4 face splits.
pub fn make_sphere_mesh(subdivisions: u32) -> TriMesh {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<[f64; 3]> = vec![
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    for v in &mut vertices {
        normalize(v);
    }
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next_faces = Vec::with_capacity(faces.len() * 4);
        for face in &faces {
            let mid = |a: usize, b: usize, vertices: &mut Vec<[f64; 3]>, cache: &mut HashMap<(usize, usize), usize>| {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    let pa = vertices[a];
                    let pb = vertices[b];
                    let mut m = [
                        0.5 * (pa[0] + pb[0]),
                        0.5 * (pa[1] + pb[1]),
                        0.5 * (pa[2] + pb[2]),
                    ];
                    normalize(&mut m);
                    vertices.push(m);
                    vertices.len() - 1
                })
            };
            let [a, b, c] = *face;
            let ab = mid(a, b, &mut vertices, &mut midpoint);
            let bc = mid(b, c, &mut vertices, &mut midpoint);
            let ca = mid(c, a, &mut vertices, &mut midpoint);
            next_faces.push([a, ab, ca]);
            next_faces.push([b, bc, ab]);
            next_faces.push([c, ca, bc]);
            next_faces.push([ab, bc, ca]);
        }
        faces = next_faces;
    }

    TriMesh::new(vertices, faces, DegeneratePolicy::Reject)
        .expect("icosphere is always a valid mesh")
        .0
}

fn normalize(v: &mut [f64; 3]) {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v[0] /= n;
    v[1] /= n;
    v[2] /= n;
}
