use crate::imaging::GrayImage;

use super::{PersistenceDiagram, UnionFind};

/// 0-dimensional persistence of the lower-star filtration of `img`.
///
/// Pixels are swept in order of (intensity, raster index). Each new pixel is
/// merged with its already-active 8-neighbours; when two components meet, the
/// one whose minimum entered later dies at the current intensity.
pub fn lsf_zero_diagram(img: &GrayImage) -> PersistenceDiagram {
    let data = img.data();
    let n = data.len();

    // counting sort by intensity keeps raster order within each level
    let mut start = [0usize; 257];
    for &v in data {
        start[v as usize + 1] += 1;
    }
    for i in 0..256 {
        start[i + 1] += start[i];
    }
    let mut order = vec![0u32; n];
    let mut rank = vec![0u32; n];
    let mut next = start;
    for (i, &v) in data.iter().enumerate() {
        let slot = next[v as usize];
        order[slot] = i as u32;
        rank[i] = slot as u32;
        next[v as usize] += 1;
    }

    let mut diagram = PersistenceDiagram::empty(0);
    let mut active = vec![false; n];
    let mut uf = UnionFind::new(n);
    for &p in &order {
        let p = p as usize;
        active[p] = true;
        let level = f64::from(data[p]);
        for q in img.neighbours8(p) {
            if !active[q] {
                continue;
            }
            let (rp, rq) = (uf.find(p), uf.find(q));
            if rp == rq {
                continue;
            }
            let (elder, younger) = if rank[rp] < rank[rq] {
                (rp, rq)
            } else {
                (rq, rp)
            };
            diagram.push(f64::from(data[younger]), level);
            uf.link(elder, younger);
        }
    }
    for i in 0..n {
        if uf.find(i) == i {
            diagram.push(f64::from(data[i]), f64::INFINITY);
        }
    }
    diagram
}
