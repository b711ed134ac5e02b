use super::MetricsSummary;

const UNDEFINED: &str = "---";

fn cell(value: Option<f64>) -> String {
    value.map_or_else(|| UNDEFINED.to_string(), |v| format!("{v:.2}"))
}

/// Fixed-width metrics table with one row per labelled summary. Undefined
/// values print as `---`.
pub fn render_table(rows: &[(&str, &MetricsSummary)]) -> String {
    let header = [
        "Method",
        "Invalid",
        "Success",
        "Validity",
        "Plausibility",
        "Proximity",
        "Sparsity",
    ];
    let body: Vec<[String; 7]> = rows
        .iter()
        .map(|(label, m)| {
            [
                label.to_string(),
                m.n_invalid.to_string(),
                cell(m.success_rate),
                cell(m.validity_rate),
                cell(m.plausibility_rate),
                cell(m.mean_proximity),
                cell(m.mean_sparsity),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            body.iter()
                .map(|r| r[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (s, w))| {
                if c == 0 {
                    format!("{s:<w$}")
                } else {
                    format!("{s:>w$}")
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = vec![line(header.to_vec())];
    out.push(
        widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .join("  "),
    );
    out.extend(
        body.iter()
            .map(|r| line(r.iter().map(String::as_str).collect())),
    );
    out.join("\n") + "\n"
}
