//! Polyline skeletons for handwriting glyphs.
//!
//! Units are tenths of the ascender height: baseline at y = 0, x-height at
//! 5, ascender at 10, descenders down to -4, y pointing up. Strokes are
//! separated by `|`, vertices by spaces.

use std::collections::HashMap;
use std::sync::OnceLock;

pub struct Glyph {
    pub width: f64,
    pub strokes: Vec<Vec<[f64; 2]>>,
}

const TABLE: &[(char, f64, &str)] = &[
    (' ', 3.0, ""),
    ('a', 5.0, "4,4 3,5 1,5 0,3 0,1 1,0 3,0 4,2|4,5 4,0"),
    ('b', 5.0, "0,10 0,0|0,3 1,5 3,5 4,3 4,1 3,0 1,0 0,1"),
    ('c', 4.0, "4,4 3,5 1,5 0,3 0,1 1,0 3,0 4,1"),
    ('d', 5.0, "4,10 4,0|4,3 3,5 1,5 0,3 0,1 1,0 3,0 4,1"),
    ('e', 5.0, "0,3 4,3 4,4 3,5 1,5 0,3 0,1 1,0 3,0 4,1"),
    ('f', 4.0, "4,9 3,10 2,10 1,9 1,0|0,5 3,5"),
    ('g', 5.0, "4,3 3,5 1,5 0,3 1,1 3,1 4,3|4,5 4,-3 3,-4 1,-4 0,-3"),
    ('h', 5.0, "0,10 0,0|0,3 1,5 3,5 4,4 4,0"),
    ('i', 2.0, "1,5 1,0|1,7 1,7.4"),
    ('j', 3.0, "2,5 2,-3 1,-4 0,-3|2,7 2,7.4"),
    ('k', 4.0, "0,10 0,0|4,5 0,2|1,3 4,0"),
    ('l', 2.0, "1,10 1,1 2,0"),
    ('m', 7.0, "0,5 0,0|0,4 1,5 2,5 3,4 3,0|3,4 4,5 5,5 6,4 6,0"),
    ('n', 5.0, "0,5 0,0|0,4 1,5 3,5 4,4 4,0"),
    ('o', 5.0, "1,5 0,4 0,1 1,0 3,0 4,1 4,4 3,5 1,5"),
    ('p', 5.0, "0,5 0,-4|0,3 1,5 3,5 4,3 4,1 3,0 1,0 0,2"),
    ('q', 5.0, "4,5 4,-4|4,3 3,5 1,5 0,3 0,1 1,0 3,0 4,2"),
    ('r', 4.0, "0,5 0,0|0,3 1,5 3,5 4,4"),
    ('s', 4.0, "4,4 3,5 1,5 0,4 1,3 3,2 4,1 3,0 1,0 0,1"),
    ('t', 4.0, "1,9 1,1 2,0 3,0|0,5 3,5"),
    ('u', 5.0, "0,5 0,1 1,0 3,0 4,1|4,5 4,0"),
    ('v', 5.0, "0,5 2,0 4,5"),
    ('w', 7.0, "0,5 1.5,0 3,4 4.5,0 6,5"),
    ('x', 5.0, "0,5 4,0|4,5 0,0"),
    ('y', 5.0, "0,5 2,0|4,5 2,0 1,-3 0,-4"),
    ('z', 5.0, "0,5 4,5 0,0 4,0"),
    ('A', 6.0, "0,0 3,10 6,0|1,3.5 5,3.5"),
    ('B', 5.0, "0,0 0,10 3,10 4.5,9 4.5,6.5 3,5.5 0,5.5|3,5.5 4.5,4.5 4.5,1 3,0 0,0"),
    ('C', 5.0, "5,8.5 4,10 1.5,10 0,8 0,2 1.5,0 4,0 5,1.5"),
    ('D', 5.0, "0,0 0,10 3,10 5,8 5,2 3,0 0,0"),
    ('E', 5.0, "5,10 0,10 0,0 5,0|0,5 3.5,5"),
    ('F', 5.0, "5,10 0,10 0,0|0,5 3.5,5"),
    ('G', 6.0, "5.5,8.5 4,10 1.5,10 0,8 0,2 1.5,0 4,0 5.5,2 5.5,4.5 3.5,4.5"),
    ('H', 5.0, "0,10 0,0|5,10 5,0|0,5 5,5"),
    ('I', 2.0, "1,10 1,0|0,10 2,10|0,0 2,0"),
    ('J', 4.0, "4,10 4,2 3,0 1,0 0,2"),
    ('K', 5.0, "0,10 0,0|5,10 0,4|1.5,5.5 5,0"),
    ('L', 4.0, "0,10 0,0 4,0"),
    ('M', 7.0, "0,0 0,10 3.5,4 7,10 7,0"),
    ('N', 6.0, "0,0 0,10 6,0 6,10"),
    ('O', 6.0, "3,10 1,9 0,6 0,4 1,1 3,0 5,1 6,4 6,6 5,9 3,10"),
    ('P', 5.0, "0,0 0,10 3.5,10 5,8.5 5,6.5 3.5,5 0,5"),
    ('Q', 6.0, "3,10 1,9 0,6 0,4 1,1 3,0 5,1 6,4 6,6 5,9 3,10|4,2 6,-1"),
    ('R', 5.0, "0,0 0,10 3.5,10 5,8.5 5,6.5 3.5,5 0,5|2.5,5 5,0"),
    ('S', 5.0, "5,8.5 4,10 1,10 0,8.5 0,6.5 1,5.5 4,4.5 5,3.5 5,1.5 4,0 1,0 0,1.5"),
    ('T', 6.0, "0,10 6,10|3,10 3,0"),
    ('U', 5.0, "0,10 0,2 1.5,0 3.5,0 5,2 5,10"),
    ('V', 6.0, "0,10 3,0 6,10"),
    ('W', 8.0, "0,10 2,0 4,7 6,0 8,10"),
    ('X', 6.0, "0,10 6,0|6,10 0,0"),
    ('Y', 6.0, "0,10 3,5 6,10|3,5 3,0"),
    ('Z', 5.0, "0,10 5,10 0,0 5,0"),
    ('0', 5.0, "2.5,10 0.5,9 0,6 0,4 0.5,1 2.5,0 4.5,1 5,4 5,6 4.5,9 2.5,10"),
    ('1', 3.0, "0,8 2,10 2,0"),
    ('2', 5.0, "0,8.5 1,10 4,10 5,8.5 5,6.5 0,0 5,0"),
    ('3', 5.0, "0,9 1,10 4,10 5,8.5 5,6.5 3.5,5.5 2,5.5|3.5,5.5 5,4.5 5,1.5 4,0 1,0 0,1"),
    ('4', 5.0, "4,0 4,10 0,3 5,3"),
    ('5', 5.0, "5,10 0.5,10 0,5.5 3.5,6 5,4.5 5,1.5 4,0 1,0 0,1"),
    ('6', 5.0, "4.5,10 2,10 0,7 0,2 1,0 4,0 5,1.5 5,4 4,5.5 1,5.5 0,4"),
    ('7', 5.0, "0,10 5,10 2,0"),
    ('8', 5.0, "2.5,5.5 0.5,6.5 0.5,9 2,10 3,10 4.5,9 4.5,6.5 2.5,5.5 0,4 0,1.5 1.5,0 3.5,0 5,1.5 5,4 2.5,5.5"),
    ('9', 5.0, "5,6 4,4.5 1,4.5 0,6 0,8.5 1,10 4,10 5,8.5 5,3 3,0 0.5,0"),
    ('.', 1.0, "0.5,0 0.5,0.4"),
    (',', 1.5, "1,0.5 1,0 0,-2"),
    (':', 1.0, "0.5,4.5 0.5,4.9|0.5,0 0.5,0.4"),
    (';', 1.5, "1,4.5 1,4.9|1,0.5 1,0 0,-2"),
    ('-', 4.0, "0,4 4,4"),
    ('+', 4.0, "0,4 4,4|2,6 2,2"),
    ('/', 4.0, "0,-1 4,10"),
    ('(', 2.5, "2.5,11 1,9 0,5 0,2 1,-1 2.5,-2"),
    (')', 2.5, "0,11 1.5,9 2.5,5 2.5,2 1.5,-1 0,-2"),
    ('\'', 1.0, "0.5,10 0.5,8"),
    ('"', 2.0, "0.5,10 0.5,8|1.5,10 1.5,8"),
    ('!', 1.0, "0.5,10 0.5,3|0.5,0 0.5,0.4"),
    ('?', 4.0, "0,8.5 1,10 3,10 4,8.5 4,7 2,5 2,3|2,0 2,0.4"),
    ('%', 6.0, "0,0 6,10|1,10 0,9 1,8 2,9 1,10|5,2 4,1 5,0 6,1 5,2"),
    ('#', 5.0, "1,1 2,9|3,1 4,9|0,3.5 5,3.5|0,6.5 5,6.5"),
    ('=', 4.0, "0,3 4,3|0,5.5 4,5.5"),
    ('_', 5.0, "0,-1 5,-1"),
    ('*', 4.0, "2,8 2,4|0,7 4,5|0,5 4,7"),
    ('<', 4.0, "4,8 0,4.5 4,1"),
    ('>', 4.0, "0,8 4,4.5 0,1"),
    ('[', 2.0, "2,11 0,11 0,-2 2,-2"),
    (']', 2.0, "0,11 2,11 2,-2 0,-2"),
    ('&', 6.0, "6,0 1,7 1,9 2,10 3,10 4,9 4,7 0,3 0,1 1,0 3,0 6,4"),
];

const SQUIGGLE: (f64, &str) = (5.0, "0,3 1,5 2,3 3,5 4,3 5,5");

fn parse(width: f64, spec: &str) -> Glyph {
    let strokes = spec
        .split('|')
        .filter(|s| !s.trim().is_empty())
        .map(|stroke| {
            stroke
                .split_whitespace()
                .map(|pt| {
                    let (x, y) = pt.split_once(',').expect("vertex is x,y");
                    [
                        x.parse::<f64>().expect("x") / 10.0,
                        y.parse::<f64>().expect("y") / 10.0,
                    ]
                })
                .collect()
        })
        .collect();
    Glyph {
        width: width / 10.0,
        strokes,
    }
}

fn table() -> &'static HashMap<char, Glyph> {
    static TABLE_CELL: OnceLock<HashMap<char, Glyph>> = OnceLock::new();
    TABLE_CELL.get_or_init(|| TABLE.iter().map(|&(c, w, s)| (c, parse(w, s))).collect())
}

pub fn glyph(c: char) -> Option<&'static Glyph> {
    table().get(&c)
}

pub fn squiggle() -> &'static Glyph {
    static CELL: OnceLock<Glyph> = OnceLock::new();
    CELL.get_or_init(|| parse(SQUIGGLE.0, SQUIGGLE.1))
}
