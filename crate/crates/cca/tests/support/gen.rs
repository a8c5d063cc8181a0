//! Seeded generator of small PHP programs.
//!
//! Programs mix every input, sink and sanitizer name of the default task
//! knowledge with interpolation, concatenation, reassignment, self-assignment
//! cycles, nested conditionals, loops, switches and user functions.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const INPUTS: [&str; 10] = [
    "$_SERVER['QUERY_STRING']",
    "$_GET['q']",
    "$_POST['q']",
    "$_FILES['q']",
    "$_REQUEST['q']",
    "$_SESSION['q']",
    "$_ENV['q']",
    "$_COOKIE['q']",
    "$php_errormsg",
    "$http_response_header",
];

pub const XSS_SINKS: [&str; 3] = ["echo", "print", "exit"];
pub const SQLI_SINKS: [&str; 9] = [
    "mysql_query",
    "mysql_unbuffered_query",
    "mysql_db_query",
    "mysqli_query",
    "mysqli_real_query",
    "mysqli_master_query",
    "mysqli_multi_query",
    "mysqli_stmt_execute",
    "mysqli_execute",
];
pub const XSS_SANS: [&str; 5] = ["encodeForHTML", "htmlentities", "htmlspecialchars", "strip_tags", "urlencode"];
pub const SQLI_SANS: [&str; 5] = [
    "mysql_escape_string",
    "mysql_real_escape_string",
    "mysqli_escape_string",
    "mysqli_real_escape_string",
    "mysqli_stmt_bind_param",
];

const VARS: [&str; 8] = ["$a", "$b", "$c", "$d", "$e", "$f", "$g", "$h"];

struct Gen {
    rng: StdRng,
    lines: Vec<String>,
    budget: usize,
}

impl Gen {
    fn var(&mut self) -> &'static str {
        VARS[self.rng.gen_range(0..VARS.len())]
    }

    fn emit(&mut self, indent: usize, s: String) {
        self.lines.push(format!("{}{}", "    ".repeat(indent), s));
    }

    fn value(&mut self) -> String {
        match self.rng.gen_range(0..10) {
            0 => INPUTS[self.rng.gen_range(0..INPUTS.len())].to_string(),
            1 => format!("\"text {}\"", self.rng.gen_range(0..100)),
            2 => self.rng.gen_range(0..100).to_string(),
            3 => format!("{} . \"-\" . {}", self.var(), self.var()),
            4 => format!("\"hi {}!\"", self.var()),
            5 => format!("\"<b>{{{}}}</b>\"", self.var()),
            6 => format!("{}({})", self.san(), self.var()),
            7 => format!("trim({})", self.var()),
            8 => format!("wrap({})", self.var()),
            _ => self.var().to_string(),
        }
    }

    fn san(&mut self) -> &'static str {
        if self.rng.gen_bool(0.5) {
            XSS_SANS[self.rng.gen_range(0..XSS_SANS.len())]
        } else {
            SQLI_SANS[self.rng.gen_range(0..SQLI_SANS.len())]
        }
    }

    fn sink(&mut self) -> String {
        let v = self.var();
        if self.rng.gen_bool(0.5) {
            match XSS_SINKS[self.rng.gen_range(0..XSS_SINKS.len())] {
                "exit" => format!("exit({v});"),
                s => format!("{s} \"<p>\" . {v};"),
            }
        } else {
            let s = SQLI_SINKS[self.rng.gen_range(0..SQLI_SINKS.len())];
            format!("{s}(\"SELECT * FROM t WHERE x='\" . {v} . \"'\");")
        }
    }

    fn condition(&mut self) -> String {
        match self.rng.gen_range(0..3) {
            0 => format!("{} == 1", self.var()),
            1 => format!("isset({})", self.var()),
            _ => format!("strlen({}) > 3", self.var()),
        }
    }

    fn block(&mut self, indent: usize, depth: usize) {
        let n = self.rng.gen_range(1..=3);
        for _ in 0..n {
            self.statement(indent, depth);
        }
    }

    fn statement(&mut self, indent: usize, depth: usize) {
        if self.budget == 0 {
            return;
        }
        self.budget -= 1;
        let nested = depth < 3;
        match self.rng.gen_range(0..16) {
            0..=3 | 14 | 15 => {
                let (v, e) = (self.var(), self.value());
                self.emit(indent, format!("{v} = {e};"));
            }
            4 => {
                let (v, w) = (self.var(), self.var());
                self.emit(indent, format!("{v} = {v} . {w};"));
            }
            5 if self.rng.gen_bool(0.5) => {
                let (v, w) = (self.var(), self.var());
                self.emit(indent, format!("{v} .= {w};"));
            }
            6 | 7 => {
                let s = self.sink();
                self.emit(indent, s);
            }
            8 if nested => {
                let c = self.condition();
                self.emit(indent, format!("if ({c}) {{"));
                self.block(indent + 1, depth + 1);
                if self.rng.gen_bool(0.4) {
                    let c = self.condition();
                    self.emit(indent, format!("}} elseif ({c}) {{"));
                    self.block(indent + 1, depth + 1);
                }
                if self.rng.gen_bool(0.6) {
                    self.emit(indent, "} else {".into());
                    self.block(indent + 1, depth + 1);
                }
                self.emit(indent, "}".into());
            }
            9 if nested => {
                let c = self.condition();
                self.emit(indent, format!("while ({c}) {{"));
                self.block(indent + 1, depth + 1);
                self.emit(indent, "}".into());
            }
            10 if nested => {
                self.emit(indent, "for ($i = 0; $i < 3; $i++) {".into());
                self.block(indent + 1, depth + 1);
                self.emit(indent, "}".into());
            }
            11 if nested => {
                let (v, w) = (self.var(), self.var());
                self.emit(indent, format!("foreach ({v} as {w}) {{"));
                self.block(indent + 1, depth + 1);
                self.emit(indent, "}".into());
            }
            12 if nested => {
                let v = self.var();
                self.emit(indent, format!("switch ({v}) {{"));
                for k in 0..self.rng.gen_range(1..=2) {
                    self.emit(indent + 1, format!("case {k}:"));
                    self.block(indent + 2, depth + 1);
                    self.emit(indent + 2, "break;".into());
                }
                self.emit(indent + 1, "default:".into());
                self.block(indent + 2, depth + 1);
                self.emit(indent, "}".into());
            }
            13 if nested => {
                self.emit(indent, "do {".into());
                self.block(indent + 1, depth + 1);
                let c = self.condition();
                self.emit(indent, format!("}} while ({c});"));
            }
            _ => {
                let (v, e) = (self.var(), self.value());
                self.emit(indent, format!("{v} = {e};"));
            }
        }
    }
}

/// Program number `i`. Every input, sink and sanitizer name appears in at
/// least one of the first 10 programs; `size` bounds the statement count.
pub fn program(i: usize, size: usize) -> String {
    let mut g = Gen { rng: StdRng::seed_from_u64(0xC0C0A + i as u64), lines: vec!["<?php".into()], budget: size };
    g.emit(0, "function wrap($p) {".into());
    g.emit(1, "return \"[\" . $p . \"]\";".into());
    g.emit(0, "}".into());
    g.emit(0, format!("$a = {};", INPUTS[i % INPUTS.len()]));
    g.emit(0, format!("$b = {}($a);", XSS_SANS[i % XSS_SANS.len()]));
    g.emit(0, format!("$c = {}($a);", SQLI_SANS[i % SQLI_SANS.len()]));
    g.emit(0, format!("$d = \"v=${{a}}\";"));
    while g.budget > 0 {
        g.statement(0, 0);
    }
    let x = XSS_SINKS[i % XSS_SINKS.len()];
    g.emit(0, if x == "exit" { "exit($b);".into() } else { format!("{x} $d;") });
    g.emit(0, format!("{}(\"SELECT \" . $c . $e);", SQLI_SINKS[i % SQLI_SINKS.len()]));
    g.lines.push(String::new());
    g.lines.join("\n")
}

/// The generated part of the corpus: small programs first.
pub fn programs(count: usize) -> Vec<(String, String)> {
    (0..count).map(|i| (format!("gen{i:02}.php"), program(i, if i % 2 == 0 { 6 } else { 14 }))).collect()
}
