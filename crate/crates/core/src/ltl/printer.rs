use super::formula::Formula;

const IFF: u8 = 1;
const IMPLIES: u8 = 2;
const OR: u8 = 3;
const AND: u8 = 4;
const UNTIL: u8 = 5;
const UNARY: u8 = 6;
const ATOMIC: u8 = 7;

fn level(f: &Formula) -> u8 {
    match f {
        Formula::True | Formula::False | Formula::Atom(_) => ATOMIC,
        Formula::Not(_)
        | Formula::Next(_)
        | Formula::Eventually(_)
        | Formula::Always(_)
        | Formula::Release(..) => UNARY,
        Formula::Until(..) => UNTIL,
        Formula::And(..) => AND,
        Formula::Or(..) => OR,
        Formula::Implies(..) => IMPLIES,
        Formula::Iff(..) => IFF,
    }
}

/// Renders `f` with the fewest parentheses that still parse back to `f`.
pub fn print(f: &Formula) -> String {
    let mut out = String::new();
    write(f, &mut out);
    out
}

fn write_wrapped(f: &Formula, parens: bool, out: &mut String) {
    if parens {
        out.push('(');
        write(f, out);
        out.push(')');
    } else {
        write(f, out);
    }
}

fn write_binary(a: &Formula, op: &str, b: &Formula, lvl: u8, right_assoc: bool, out: &mut String) {
    let (left_parens, right_parens) = if right_assoc {
        (level(a) <= lvl, level(b) < lvl)
    } else {
        (level(a) < lvl, level(b) <= lvl)
    };
    write_wrapped(a, left_parens, out);
    out.push(' ');
    out.push_str(op);
    out.push(' ');
    write_wrapped(b, right_parens, out);
}

fn write_unary(op: &str, a: &Formula, out: &mut String) {
    out.push_str(op);
    let parens = level(a) < UNARY;
    if !parens && op != "!" {
        out.push(' ');
    }
    write_wrapped(a, parens, out);
}

fn write(f: &Formula, out: &mut String) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Atom(name) => out.push_str(name),
        Formula::Not(a) => write_unary("!", a, out),
        Formula::Next(a) => write_unary("X", a, out),
        Formula::Eventually(a) => write_unary("F", a, out),
        Formula::Always(a) => write_unary("G", a, out),
        Formula::And(a, b) => write_binary(a, "&", b, AND, false, out),
        Formula::Or(a, b) => write_binary(a, "|", b, OR, false, out),
        Formula::Iff(a, b) => write_binary(a, "<->", b, IFF, false, out),
        Formula::Implies(a, b) => write_binary(a, "->", b, IMPLIES, true, out),
        Formula::Until(a, b) => write_binary(a, "U", b, UNTIL, true, out),
        Formula::Release(a, b) => {
            let dual = Formula::not(Formula::until(
                Formula::not((**a).clone()),
                Formula::not((**b).clone()),
            ));
            write(&dual, out);
        }
    }
}
