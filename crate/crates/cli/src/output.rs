//! CSV traces, certificate footers, text reports and gnuplot scripts.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use pdflow::{ConditionReport, RateCertificate, SystemState, TraceRecord};

pub const FLOW_HEADER: [&str; 7] = [
    "t",
    "dist_primal",
    "dist_dual",
    "feas",
    "lyapunov",
    "ergodic_feas",
    "ergodic_gap",
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

/// Whether the first column holds times or iteration counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    Time,
    Iteration,
}

/// Writes the trace rows, an optional state dump and a `# key = value` footer.
pub fn write_trace(
    path: &Path,
    clock: Clock,
    trace: &[TraceRecord],
    states: Option<&[SystemState]>,
    footer: &[(String, String)],
) -> io::Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut header: Vec<String> = FLOW_HEADER.iter().map(|s| s.to_string()).collect();
        if clock == Clock::Iteration {
            header[0] = "k".into();
        }
        if let Some(s) = states.and_then(|s| s.first()) {
            header.extend((0..s.x.len()).map(|i| format!("x_{i}")));
            header.extend((0..s.z.len()).map(|i| format!("z_{i}")));
            header.extend((0..s.y.len()).map(|i| format!("y_{i}")));
        }
        w.write_record(&header)?;
        for (i, r) in trace.iter().enumerate() {
            let first = match clock {
                Clock::Time => r.t.to_string(),
                Clock::Iteration => format!("{}", r.t as u64),
            };
            let mut row = vec![
                first,
                opt(r.dist_primal),
                opt(r.dist_dual),
                format!("{:e}", r.feas),
                opt(r.lyapunov),
                opt(r.ergodic_feas),
                opt(r.ergodic_gap),
            ];
            if let Some(s) = states.map(|s| &s[i]) {
                row.extend(s.x.iter().chain(&s.z).chain(&s.y).map(|v| format!("{v:e}")));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    for (k, v) in footer {
        writeln!(buf, "# {k} = {v}")?;
    }
    fs::write(path, buf)
}

pub fn certificate_footer(cert: &RateCertificate) -> Vec<(String, String)> {
    cert.key_values()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

pub fn condition_footer(rep: &ConditionReport) -> Vec<(String, String)> {
    let mut out = vec![
        ("condition.cstrong".to_string(), rep.cstrong.holds.to_string()),
        ("condition.alpha".to_string(), format!("{:.12e}", rep.cstrong.alpha)),
        ("condition.cweak".to_string(), rep.cweak.to_string()),
        ("condition.rate_condition".to_string(), rep.rate_condition.to_string()),
        ("condition.thm4_psd".to_string(), rep.thm4_psd.to_string()),
        ("condition.thm7_psd".to_string(), rep.thm7_psd.to_string()),
    ];
    if let Some(s) = rep.step_size {
        out.push(("condition.step_size".to_string(), s.to_string()));
    }
    out.extend([
        ("condition.monotone".to_string(), rep.monotone.to_string()),
        ("condition.metrics_psd".to_string(), rep.metrics_psd.to_string()),
        ("condition.derivative_bounded".to_string(), rep.derivative_bounded.to_string()),
    ]);
    out
}

pub fn format_footer(lines: &[(String, String)]) -> String {
    lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// gnuplot script plotting distances and feasibility of one trace.
pub fn plot_script(csv_name: &str, clock: Clock) -> String {
    let stem = csv_name.trim_end_matches(".csv");
    let xlabel = match clock {
        Clock::Time => "t",
        Clock::Iteration => "k",
    };
    format!(
        "set datafile separator ','\n\
         set datafile missing ''\n\
         set key autotitle columnhead\n\
         set logscale y\n\
         set format y '%.0e'\n\
         set xlabel '{xlabel}'\n\
         set terminal pngcairo size 900,600\n\
         set output '{stem}.png'\n\
         plot '{csv_name}' using 1:2 with lines, \\\n\
         \x20    '' using 1:3 with lines, \\\n\
         \x20    '' using 1:4 with lines, \\\n\
         \x20    '' using 1:6 with lines\n"
    )
}

/// gnuplot script overlaying `‖x - x*‖` for every run of a sweep.
pub fn sweep_plot_script(runs: &[(String, String)]) -> String {
    let mut s = String::from(
        "set datafile separator ','\n\
         set datafile missing ''\n\
         set logscale y\n\
         set format y '%.0e'\n\
         set xlabel 't'\n\
         set ylabel '||x - x*||'\n\
         set terminal pngcairo size 900,600\n\
         set output 'sweep.png'\n",
    );
    let parts: Vec<String> = runs
        .iter()
        .map(|(file, title)| format!("'{file}' using 1:2 with lines title '{title}'"))
        .collect();
    s.push_str("plot ");
    s.push_str(&parts.join(", \\\n     "));
    s.push('\n');
    s
}
