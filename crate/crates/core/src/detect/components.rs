use super::BoundingBox;

/// Fills background runs of at most `gap` pixels lying between two foreground
/// pixels on the same row.
pub fn smear_horizontal(mask: &[bool], width: usize, height: usize, gap: usize) -> Vec<bool> {
    let mut out = mask.to_vec();
    for y in 0..height {
        let row = &mut out[y * width..(y + 1) * width];
        let mut last_fg: Option<usize> = None;
        for x in 0..width {
            if mask[y * width + x] {
                if let Some(prev) = last_fg {
                    let run = x - prev - 1;
                    if run > 0 && run <= gap {
                        row[prev + 1..x].iter_mut().for_each(|v| *v = true);
                    }
                }
                last_fg = Some(x);
            }
        }
    }
    out
}

/// Bounding boxes of 8-connected foreground components, in scan order of
/// each component's first pixel.
pub fn connected_components(mask: &[bool], width: usize, height: usize) -> Vec<BoundingBox> {
    let mut seen = vec![false; mask.len()];
    let mut stack = Vec::new();
    let mut boxes = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % width, i / width);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for ny in y.saturating_sub(1)..=(y + 1).min(height - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(width - 1) {
                    let j = ny * width + nx;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        boxes.push(BoundingBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1));
    }
    boxes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(rows: &[&str]) -> (Vec<bool>, usize, usize) {
        let w = rows[0].len();
        let m = rows.iter().flat_map(|r| r.chars().map(|c| c == '#')).collect();
        (m, w, rows.len())
    }

    #[test]
    fn smear_fills_short_gaps_only() {
        let (m, w, h) = mask(&["#..#.....#"]);
        let s = smear_horizontal(&m, w, h, 2);
        let got: String = s.iter().map(|&b| if b { '#' } else { '.' }).collect();
        assert_eq!(got, "####.....#");
    }

    #[test]
    fn components_use_eight_connectivity() {
        let (m, w, h) = mask(&["#...", ".#..", "..#.", "...#"]);
        let boxes = connected_components(&m, w, h);
        assert_eq!(
            boxes,
            vec![BoundingBox::new(0, 0, 4, 4)],
            "diagonal chain is one component"
        );
        let (m, w, h) = mask(&["#.#", "...", "#.#"]);
        assert_eq!(connected_components(&m, w, h).len(), 4);
    }
}
