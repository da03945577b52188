//! Static SVG charts for comparison and sweep CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const PANEL_HEIGHT: f64 = 220.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1"];

fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()).map_err(|e| e.to_string()))
        .collect::<Result<Vec<Vec<String>>, _>>()?;
    if header.iter().all(|h| h.is_empty()) || rows.is_empty() {
        return Err("CSV has no data rows".into());
    }
    Ok((header, rows))
}

fn number(cell: &str, row: usize, col: &str) -> Result<f64, String> {
    cell.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("row {}: column {col} value {cell:?} is not a finite number", row + 2))
}

fn column(header: &[String], name: &str) -> Result<usize, String> {
    header.iter().position(|h| h == name).ok_or_else(|| format!("missing column {name:?}"))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open_svg(height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" \
         viewBox=\"0 0 {WIDTH} {height}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Picks a chart type from the header: `method` and `compactness` columns give
/// grouped bars, a `t_prime` column gives one line panel per other column.
pub fn render_csv(text: &str) -> Result<String, String> {
    let (header, rows) = read_table(text)?;
    if header.iter().any(|h| h == "t_prime") {
        sweep_lines(&header, &rows)
    } else if header.iter().any(|h| h == "method") && header.iter().any(|h| h == "compactness") {
        grouped_bars(&header, &rows)
    } else {
        Err(format!("unrecognised CSV columns: {}", header.join(",")))
    }
}

fn grouped_bars(header: &[String], rows: &[Vec<String>]) -> Result<String, String> {
    let (gi, mi, ci) = (column(header, "identity")?, column(header, "method")?, column(header, "compactness")?);
    let mut groups: Vec<String> = Vec::new();
    let mut methods: Vec<String> = Vec::new();
    let mut values: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (r, row) in rows.iter().enumerate() {
        let g = match groups.iter().position(|x| *x == row[gi]) {
            Some(p) => p,
            None => {
                groups.push(row[gi].clone());
                groups.len() - 1
            }
        };
        let m = match methods.iter().position(|x| *x == row[mi]) {
            Some(p) => p,
            None => {
                methods.push(row[mi].clone());
                methods.len() - 1
            }
        };
        values.insert((g, m), number(&row[ci], r, "compactness")?);
    }
    let top = values.values().fold(0.0f64, |a, &b| a.max(b)).max(f64::MIN_POSITIVE);
    let height = PANEL_HEIGHT + 2.0 * MARGIN;
    let plot_w = WIDTH - 2.0 * MARGIN;
    let group_w = plot_w / groups.len() as f64;
    let bar_w = group_w * 0.8 / methods.len() as f64;

    let mut svg = open_svg(height);
    writeln!(svg, "<text x=\"{MARGIN}\" y=\"20\">compactness by method</text>").unwrap();
    for (g, name) in groups.iter().enumerate() {
        let x0 = MARGIN + g as f64 * group_w + group_w * 0.1;
        for m in 0..methods.len() {
            if let Some(&v) = values.get(&(g, m)) {
                let h = PANEL_HEIGHT * v / top;
                writeln!(
                    svg,
                    "<rect class=\"bar\" x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"{}\"><title>{} {}: {v}</title></rect>",
                    x0 + m as f64 * bar_w,
                    MARGIN + PANEL_HEIGHT - h,
                    bar_w,
                    PALETTE[m % PALETTE.len()],
                    escape(name),
                    escape(&methods[m]),
                )
                .unwrap();
            }
        }
        writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            x0 + group_w * 0.4,
            MARGIN + PANEL_HEIGHT + 16.0,
            escape(name)
        )
        .unwrap();
    }
    for (m, name) in methods.iter().enumerate() {
        let x = MARGIN + m as f64 * 110.0;
        writeln!(
            svg,
            "<rect x=\"{x}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{}\" y=\"{:.2}\">{}</text>",
            height - 18.0,
            PALETTE[m % PALETTE.len()],
            x + 14.0,
            height - 9.0,
            escape(name)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn sweep_lines(header: &[String], rows: &[Vec<String>]) -> Result<String, String> {
    let ti = column(header, "t_prime")?;
    let xs: Vec<f64> =
        rows.iter().enumerate().map(|(r, row)| number(&row[ti], r, "t_prime")).collect::<Result<_, _>>()?;
    let metrics: Vec<usize> = (0..header.len()).filter(|&c| c != ti).collect();
    let height = metrics.len() as f64 * (PANEL_HEIGHT + MARGIN) + MARGIN;
    let plot_w = WIDTH - 2.0 * MARGIN;
    let (xmin, xmax) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let xspan = if xmax > xmin { xmax - xmin } else { 1.0 };

    let mut svg = open_svg(height);
    for (p, &c) in metrics.iter().enumerate() {
        let ys: Vec<f64> =
            rows.iter().enumerate().map(|(r, row)| number(&row[c], r, &header[c])).collect::<Result<_, _>>()?;
        let (ymin, ymax) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
        let yspan = if ymax > ymin { ymax - ymin } else { 1.0 };
        let top = MARGIN + p as f64 * (PANEL_HEIGHT + MARGIN);
        let points: Vec<String> = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                format!(
                    "{:.2},{:.2}",
                    MARGIN + plot_w * (x - xmin) / xspan,
                    top + PANEL_HEIGHT * (1.0 - (y - ymin) / yspan)
                )
            })
            .collect();
        writeln!(svg, "<text x=\"{MARGIN}\" y=\"{:.2}\">{} vs t_prime</text>", top - 8.0, escape(&header[c])).unwrap();
        writeln!(
            svg,
            "<rect x=\"{MARGIN}\" y=\"{top:.2}\" width=\"{plot_w}\" height=\"{PANEL_HEIGHT}\" fill=\"none\" stroke=\"#ccc\"/>"
        )
        .unwrap();
        writeln!(
            svg,
            "<polyline class=\"series\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>",
            PALETTE[p % PALETTE.len()],
            points.join(" ")
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{ymax:.4}</text><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{ymin:.4}</text>",
            MARGIN - 4.0,
            top + 10.0,
            MARGIN - 4.0,
            top + PANEL_HEIGHT
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
