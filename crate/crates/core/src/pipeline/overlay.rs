//! Indexed SVG overlay for annotators and the generation model.

use std::fmt::Write as _;

use super::Sample;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One outlined rectangle per OCR box plus its index at the top-left corner,
/// sized to the image so it can be composited over it.
pub fn emit_overlay(sample: &Sample) -> String {
    let (w, h) = (sample.image.width, sample.image.height);
    let mut svg = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
<title>{}</title>\n\
<g fill=\"none\" stroke=\"#e6194b\" stroke-width=\"1\">\n",
        escape(&sample.id)
    );
    for o in &sample.ocr {
        let b = o.bbox;
        let _ = writeln!(
            svg,
            "<rect data-index=\"{}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>",
            o.index,
            b.x1(),
            b.y1(),
            b.width(),
            b.height()
        );
    }
    svg.push_str(
        "</g>\n<g fill=\"#e6194b\" font-family=\"monospace\" font-size=\"10\" dominant-baseline=\"hanging\">\n",
    );
    for o in &sample.ocr {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\">{}</text>",
            o.bbox.x1(),
            o.bbox.y1(),
            o.index
        );
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use regex::Regex;

    use super::*;
    use crate::geometry::BBox;
    use crate::pipeline::benchmark::fixtures::sample;

    #[test]
    fn one_rect_and_label_per_box() {
        let svg = emit_overlay(&sample("a", "x", 7, &[0]));
        assert_eq!(svg.matches("<rect ").count(), 7);
        assert_eq!(svg.matches("<text ").count(), 7);
        assert!(svg.contains("width=\"200\" height=\"100\""));
    }

    #[test]
    fn empty_document() {
        let svg = emit_overlay(&sample("a", "x", 0, &[]));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<rect ").count(), 0);
    }

    #[test]
    fn parse_back_coordinates() {
        let s = sample("a&b", "x", 5, &[0]);
        let svg = emit_overlay(&s);
        assert!(svg.contains("<title>a&amp;b</title>"));
        let rect =
            Regex::new(r#"<rect data-index="(\d+)" x="(\d+)" y="(\d+)" width="(\d+)" height="(\d+)"/>"#).unwrap();
        let label = Regex::new(r#"<text x="(\d+)" y="(\d+)">(\d+)</text>"#).unwrap();
        let n = |c: &regex::Captures, i: usize| c[i].parse::<u32>().unwrap();
        let rects: Vec<(usize, BBox)> = rect
            .captures_iter(&svg)
            .map(|c| {
                let (x, y) = (n(&c, 2), n(&c, 3));
                (n(&c, 1) as usize, BBox::new(x, y, x + n(&c, 4), y + n(&c, 5)).unwrap())
            })
            .collect();
        let expected: Vec<(usize, BBox)> = s.ocr.iter().map(|o| (o.index, o.bbox)).collect();
        assert_eq!(rects, expected);
        for (c, o) in label.captures_iter(&svg).zip(&s.ocr) {
            assert_eq!(
                (n(&c, 1), n(&c, 2), n(&c, 3) as usize),
                (o.bbox.x1(), o.bbox.y1(), o.index)
            );
        }
    }
}
