//! Gnuplot scripts next to each CSV.

use semiper::stability::ScanResult;

fn header(stem: &str, log_x: bool, log_y: bool) -> String {
    let mut s = format!("set datafile separator ','\nset key top right\nset terminal pngcairo size 900,600\nset output '{stem}.png'\n");
    if log_x {
        s.push_str("set logscale x\n");
    }
    if log_y {
        s.push_str("set logscale y\n");
    }
    s
}

pub fn scan_script(csv: &str, stem: &str, scan: &ScanResult, log_log: bool) -> String {
    let mut s = header(stem, log_log, true);
    s.push_str(&format!("plot '{csv}' every ::1 using 1:2 with linespoints title 'value'"));
    if !scan.pointwise.is_empty() {
        s.push_str(&format!(", '{csv}' every ::1 using 1:3 with lines title 'pointwise'"));
    }
    if let Some(fit) = &scan.fit {
        s.push_str(&format!(", {c:e} * x**({e:e}) title 'fit'", c = fit.constant, e = fit.exponent));
    }
    s.push('\n');
    s
}

pub fn convergence_script(csv: &str, starts: usize) -> String {
    let mut s = header("convergence", false, true);
    let curves: Vec<String> = (0..starts).map(|i| format!("'{csv}' every ::1 using 1:{} with lines title 'start {i}'", i + 2)).collect();
    s.push_str(&format!("plot {}\n", curves.join(", ")));
    s
}

pub fn overlay_script(csv: &str, stem: &str, first: &str, second: &str, log_log: bool) -> String {
    let mut s = header(stem, log_log, log_log);
    s.push_str(&format!("plot '{csv}' every ::1 using 1:2 with linespoints title '{first}', '{csv}' every ::1 using 1:3 with lines title '{second}'\n"));
    s
}
