use crate::devices::DisplayFrame;

/// 5×7 glyphs for the digits, one row per byte, bit 4 leftmost.
const GLYPHS: [[u8; 7]; 10] = [
    [0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e],
    [0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e],
    [0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f],
    [0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e],
    [0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02],
    [0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e],
    [0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e],
    [0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
    [0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e],
    [0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c],
];

/// Whether glyph cell `(col, row)` of `digit` is lit.
pub fn glyph_bit(digit: u8, col: usize, row: usize) -> bool {
    GLYPHS[digit as usize % 10][row] >> (4 - col) & 1 == 1
}

/// A digit drawn as large as fits with a one-cell margin, centered.
pub fn render_numeral(
    display: &str,
    width: u32,
    height: u32,
    digit: u8,
    fg: [u8; 3],
    bg: [u8; 3],
) -> DisplayFrame {
    let (w, h) = (width as usize, height as usize);
    let scale = (w / 7).min(h / 9).max(1);
    let (gw, gh) = (5 * scale, 7 * scale);
    let x0 = w.saturating_sub(gw) / 2;
    let y0 = h.saturating_sub(gh) / 2;
    let mut pixels = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let lit = x >= x0
                && y >= y0
                && x < x0 + gw
                && y < y0 + gh
                && glyph_bit(digit, (x - x0) / scale, (y - y0) / scale);
            pixels.extend_from_slice(if lit { &fg } else { &bg });
        }
    }
    DisplayFrame {
        display: display.to_string(),
        width,
        height,
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_is_a_vertical_stroke() {
        let f = render_numeral("d", 64, 64, 1, [255; 3], [0; 3]);
        assert_eq!(f.pixels.len(), 64 * 64 * 3);
        // scale 7: glyph spans x 14..49, y 7..56; the stem is column 2
        assert_eq!(f.pixel(31, 30), [255; 3]);
        assert_eq!(f.pixel(14, 30), [0; 3]);
        assert_eq!(f.pixel(0, 0), [0; 3]);
    }

    #[test]
    fn digits_differ() {
        let frames: Vec<_> = (0..10)
            .map(|d| render_numeral("d", 32, 32, d, [1; 3], [0; 3]).pixels)
            .collect();
        for i in 0..10 {
            for j in i + 1..10 {
                assert_ne!(frames[i], frames[j], "{i} vs {j}");
            }
        }
    }
}
