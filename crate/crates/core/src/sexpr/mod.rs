//! S-expression programs: parsing, printing, flattening into subprogram
//! sequences, and execution.

mod denest;
mod exec;
mod parse;
mod program;

pub use denest::{denest, denest_onto, set_leaves, SequenceError, SubprogramSequence};
pub use exec::{execute, execute_all, execute_program, execute_step, Denotation, DenotationKind, ExecError};
pub use parse::{parse, parse_with, AtomKind, NamingConvention, ParseError, ParseErrorKind, ParseOptions, SymbolTable};
pub use program::{invert_relation_name, Function, Program, Slot};
