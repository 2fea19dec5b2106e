//! Zhang–Suen thinning.
//!
//! Each sub-iteration marks pixels with the classic parallel Zhang–Suen
//! test, then removes the marked pixels one at a time, skipping any whose
//! removal would no longer be topology preserving given the deletions
//! already applied in that sub-iteration. Plain parallel Zhang–Suen erases
//! 2×2 blocks and can cut two-pixel-thick diagonals; the confirmation pass
//! keeps the 8-connected component count of the input.

use crate::volume::Binary2;

#[derive(Clone, Copy, PartialEq, Eq)]
enum SubIteration {
    First,
    Second,
}

/// Neighbours P2..P9, clockwise from north (v grows downward).
#[inline]
fn ring(img: &Binary2, u: usize, v: usize) -> [bool; 8] {
    let (u, v) = (u as i64, v as i64);
    [
        img.at(u, v - 1),
        img.at(u + 1, v - 1),
        img.at(u + 1, v),
        img.at(u + 1, v + 1),
        img.at(u, v + 1),
        img.at(u - 1, v + 1),
        img.at(u - 1, v),
        img.at(u - 1, v - 1),
    ]
}

fn zhang_suen_marks(img: &Binary2, u: usize, v: usize, step: SubIteration) -> bool {
    let p = ring(img, u, v);
    let b = p.iter().filter(|&&x| x).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
    if a != 1 {
        return false;
    }
    let [p2, _, p4, _, p6, _, p8, _] = p;
    match step {
        SubIteration::First => !(p2 && p4 && p6) && !(p4 && p6 && p8),
        SubIteration::Second => !(p2 && p4 && p8) && !(p2 && p6 && p8),
    }
}

/// Yokoi 8-connectivity number; a foreground pixel is 8-simple iff it is 1.
fn connectivity_number(img: &Binary2, u: usize, v: usize) -> u32 {
    let p = ring(img, u, v);
    // reorder to x1..x8 counter-clockwise from east: E, NE, N, NW, W, SW, S, SE
    let x = [p[2], p[1], p[0], p[7], p[6], p[5], p[4], p[3]];
    let bar = |i: usize| !x[i % 8] as u32;
    [0, 2, 4, 6]
        .iter()
        .map(|&k| bar(k) - bar(k) * bar(k + 1) * bar(k + 2))
        .sum()
}

fn removable(img: &Binary2, u: usize, v: usize) -> bool {
    let neighbours = ring(img, u, v).iter().filter(|&&x| x).count();
    neighbours >= 1 && connectivity_number(img, u, v) == 1
}

/// Thins foreground regions to one-pixel-wide curves.
pub fn skeletonize_2d(img: &Binary2) -> Binary2 {
    let mut out = img.clone();
    loop {
        let mut changed = false;
        for step in [SubIteration::First, SubIteration::Second] {
            let marked: Vec<(usize, usize)> = out
                .pixels()
                .filter(|&(u, v)| zhang_suen_marks(&out, u, v, step))
                .collect();
            for (u, v) in marked {
                if removable(&out, u, v) {
                    out.set(u, v, false);
                    changed = true;
                }
            }
        }
        if !changed {
            return out;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Image2;

    /// Textbook parallel Zhang–Suen, kept independent of the implementation above.
    fn reference_zhang_suen(img: &Binary2) -> Binary2 {
        let mut img = img.clone();
        let at = |m: &Binary2, u: i64, v: i64| -> u8 { m.at(u, v) as u8 };
        loop {
            let mut changed = false;
            for step in 0..2 {
                let mut dels = vec![];
                for (u, v) in img.pixels() {
                    let (x, y) = (u as i64, v as i64);
                    let p = [
                        at(&img, x, y - 1),
                        at(&img, x + 1, y - 1),
                        at(&img, x + 1, y),
                        at(&img, x + 1, y + 1),
                        at(&img, x, y + 1),
                        at(&img, x - 1, y + 1),
                        at(&img, x - 1, y),
                        at(&img, x - 1, y - 1),
                    ];
                    let b: u8 = p.iter().sum();
                    let a = (0..8).filter(|&i| p[i] == 0 && p[(i + 1) % 8] == 1).count();
                    let ok = if step == 0 {
                        p[0] * p[2] * p[4] == 0 && p[2] * p[4] * p[6] == 0
                    } else {
                        p[0] * p[2] * p[6] == 0 && p[0] * p[4] * p[6] == 0
                    };
                    if (2..=6).contains(&b) && a == 1 && ok {
                        dels.push((u, v));
                    }
                }
                changed |= !dels.is_empty();
                for (u, v) in dels {
                    img.set(u, v, false);
                }
            }
            if !changed {
                return img;
            }
        }
    }

    fn from_rows(rows: &[&str]) -> Binary2 {
        let h = rows.len();
        let w = rows[0].len();
        Image2::from_fn(w, h, |u, v| rows[v].as_bytes()[u] == b'#')
    }

    #[test]
    fn thin_line_unchanged() {
        let line = from_rows(&["........", ".######.", "........"]);
        assert_eq!(skeletonize_2d(&line), line);
        let diag = from_rows(&["#...", ".#..", "..#.", "...#"]);
        assert_eq!(skeletonize_2d(&diag), diag);
    }

    #[test]
    fn empty_stays_empty() {
        let e = Image2::filled(5, 4, false);
        assert_eq!(skeletonize_2d(&e), e);
    }

    #[test]
    fn filled_rectangle_matches_reference() {
        let rect = Image2::filled(5, 3, true);
        let expected = reference_zhang_suen(&rect);
        let got = skeletonize_2d(&rect);
        assert_eq!(got, expected);
        // a segment of the middle row
        assert!(got.pixels().all(|(_, v)| v == 1));
        assert_eq!(got.pixels().collect::<Vec<_>>(), vec![(1, 1), (2, 1)]);
    }

    #[test]
    fn two_by_two_block_survives() {
        let block = from_rows(&["....", ".##.", ".##.", "...."]);
        assert!(reference_zhang_suen(&block).is_empty());
        let got = skeletonize_2d(&block);
        assert!(!got.is_empty());
        assert!(got.pixels().all(|(u, v)| block.get(u, v)));
    }

    #[test]
    fn result_has_no_full_neighbourhood() {
        let disk = Image2::from_fn(21, 21, |u, v| {
            let (x, y) = (u as f64 - 10.0, v as f64 - 10.0);
            x * x + y * y <= 64.0
        });
        let sk = skeletonize_2d(&disk);
        assert!(!sk.is_empty());
        for (u, v) in sk.pixels() {
            assert!(ring(&sk, u, v).iter().any(|&x| !x));
        }
    }
}
