//! Random small terminating programs for the theorem suite.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lang::{parse, Stmt};
use crate::monitor::{Binding, InitData, InitState, Label};

#[derive(Debug, Clone)]
pub struct Generated {
    pub source: String,
    pub program: Stmt,
    pub init: InitState,
}

/// Shape limits. Loops run at most `max_loop` times, counted by a fresh
/// counter the body never writes. Objects are only created by literals and
/// never copied between variables, so fields are not aliased.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_stmts: usize,
    pub max_depth: usize,
    pub max_loop: i64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_stmts: 8,
            max_depth: 2,
            max_loop: 3,
        }
    }
}

pub struct Generator {
    rng: ChaCha8Rng,
    cfg: GenConfig,
    ints: Vec<String>,
    bools: Vec<String>,
    objs: Vec<String>,
    counters: usize,
    budget: usize,
}

const FIELDS: [&str; 2] = ["a", "b"];

impl Generator {
    pub fn new(seed: u64) -> Self {
        Generator::with_config(seed, GenConfig::default())
    }

    pub fn with_config(seed: u64, cfg: GenConfig) -> Self {
        Generator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            cfg,
            ints: Vec::new(),
            bools: Vec::new(),
            objs: Vec::new(),
            counters: 0,
            budget: 0,
        }
    }

    /// Next program with its initial state; `index` only names the file.
    pub fn generate(&mut self, index: usize) -> Generated {
        let mut init = InitState::new();
        self.ints = vec!["l1".into(), "l2".into()];
        self.bools = vec!["b1".into()];
        self.objs = vec!["o".into()];
        self.counters = 0;
        for x in ["l1", "l2"] {
            let n = self.rng.gen_range(0..3i64);
            init = init.with(x, n, Label::L);
        }
        let b = self.rng.gen_bool(0.5);
        init = init.with("b1", b, Label::L);
        let fields = FIELDS
            .iter()
            .map(|f| (f.to_string(), InitData::Int(self.rng.gen_range(0..3))))
            .collect::<BTreeMap<_, _>>();
        init.env
            .insert("o".into(), Binding::new(InitData::Object(fields), Label::L));
        let secrets = self.rng.gen_range(1..=2);
        for i in 1..=secrets {
            let name = format!("h{i}");
            if self.rng.gen_bool(0.5) {
                let v = self.rng.gen_bool(0.5);
                init = init.with(&name, v, Label::H);
                self.bools.push(name);
            } else {
                let v = self.rng.gen_range(0..3i64);
                init = init.with(&name, v, Label::H);
                self.ints.push(name);
            }
        }
        self.budget = self.rng.gen_range(1..=self.cfg.max_stmts);
        let mut out = String::new();
        while self.budget > 0 {
            self.stmt(0, &mut out, 0);
        }
        let program = parse(&out, &format!("gen{index}.njs")).expect("generated programs parse");
        Generated {
            source: out,
            program,
            init,
        }
    }

    fn indent(out: &mut String, depth: usize) {
        out.push_str(&"  ".repeat(depth));
    }

    fn block(&mut self, depth: usize, out: &mut String, indent: usize) {
        let n = self.rng.gen_range(1..=2);
        for _ in 0..n {
            if self.budget == 0 {
                break;
            }
            self.stmt(depth, out, indent);
        }
    }

    fn stmt(&mut self, depth: usize, out: &mut String, indent: usize) {
        self.budget -= 1;
        Self::indent(out, indent);
        let nested = depth < self.cfg.max_depth && self.budget > 0;
        let pick = self.rng.gen_range(0..if nested { 9 } else { 6 });
        match pick {
            0 | 1 => {
                let x = self.ints.choose(&mut self.rng).unwrap().clone();
                let e = self.int_expr(2);
                out.push_str(&format!("{x} = {e};\n"));
            }
            2 => {
                let x = self.bools.choose(&mut self.rng).unwrap().clone();
                let e = self.bool_expr(2);
                out.push_str(&format!("{x} = {e};\n"));
            }
            3 => {
                let o = self.objs.choose(&mut self.rng).unwrap().clone();
                let f = FIELDS.choose(&mut self.rng).unwrap();
                let e = self.int_expr(2);
                out.push_str(&format!("{o}.{f} = {e};\n"));
            }
            4 | 5 => {
                let e = match self.rng.gen_range(0..4) {
                    0 => self.bool_expr(2),
                    1 => self.objs.choose(&mut self.rng).unwrap().clone(),
                    _ => self.int_expr(2),
                };
                out.push_str(&format!("sink({e});\n"));
            }
            6 | 7 => {
                let g = self.bool_expr(2);
                out.push_str(&format!("if ({g}) {{\n"));
                self.block(depth + 1, out, indent + 1);
                Self::indent(out, indent);
                if self.rng.gen_bool(0.5) && self.budget > 0 {
                    out.push_str("} else {\n");
                    self.block(depth + 1, out, indent + 1);
                    Self::indent(out, indent);
                }
                out.push_str("}\n");
            }
            _ => {
                self.counters += 1;
                let c = format!("c{}", self.counters);
                let n = self.rng.gen_range(1..=self.cfg.max_loop);
                out.push_str(&format!("{c} = 0;\n"));
                Self::indent(out, indent);
                out.push_str(&format!("while ({c} < {n}) {{\n"));
                self.block(depth + 1, out, indent + 1);
                Self::indent(out, indent + 1);
                out.push_str(&format!("{c} = {c} + 1;\n"));
                Self::indent(out, indent);
                out.push_str("}\n");
            }
        }
    }

    fn int_expr(&mut self, depth: usize) -> String {
        let leaf = depth == 0 || self.rng.gen_bool(0.4);
        if leaf {
            return match self.rng.gen_range(0..4) {
                0 => self.rng.gen_range(0..4).to_string(),
                1 => {
                    let o = self.objs.choose(&mut self.rng).unwrap();
                    format!("{o}.{}", FIELDS.choose(&mut self.rng).unwrap())
                }
                _ => self.ints.choose(&mut self.rng).unwrap().clone(),
            };
        }
        let a = self.int_expr(depth - 1);
        match self.rng.gen_range(0..3) {
            0 => format!("({a} + {})", self.int_expr(depth - 1)),
            1 => format!("({a} - {})", self.int_expr(depth - 1)),
            _ => format!("({a} * {})", self.rng.gen_range(0..3)),
        }
    }

    fn bool_expr(&mut self, depth: usize) -> String {
        let leaf = depth == 0 || self.rng.gen_bool(0.3);
        if leaf {
            return match self.rng.gen_range(0..3) {
                0 => self.rng.gen_bool(0.5).to_string(),
                _ => self.bools.choose(&mut self.rng).unwrap().clone(),
            };
        }
        match self.rng.gen_range(0..5) {
            0 => format!("!{}", self.bool_expr(depth - 1)),
            1 => format!("({} && {})", self.bool_expr(depth - 1), self.bool_expr(depth - 1)),
            2 => format!("({} || {})", self.bool_expr(depth - 1), self.bool_expr(depth - 1)),
            3 => format!("({} < {})", self.int_expr(depth - 1), self.int_expr(depth - 1)),
            _ => format!("({} === {})", self.int_expr(depth - 1), self.int_expr(depth - 1)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monitor::{run, Strategy, StrategyConfig};

    #[test]
    fn same_seed_same_programs() {
        let mut a = Generator::new(7);
        let mut b = Generator::new(7);
        for i in 0..20 {
            assert_eq!(a.generate(i).source, b.generate(i).source);
        }
    }

    #[test]
    fn generated_programs_terminate_without_errors() {
        let mut g = Generator::new(11);
        for i in 0..300 {
            let p = g.generate(i);
            let top = p.program.flatten().len();
            assert!(top <= 8 * 2, "{}", p.source);
            let r = run(
                &p.program,
                &p.init,
                &[],
                &StrategyConfig::measure(Strategy::Pu).with_budget(100_000),
            )
            .unwrap_or_else(|e| panic!("{e}\n{}", p.source));
            assert!(r.completed(), "{}", p.source);
        }
    }
}
