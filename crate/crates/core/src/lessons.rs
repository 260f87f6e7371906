//! Course lesson taxonomy: two terms of fourteen weekly lessons.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lesson {
    pub id: &'static str,
    pub term: u8,
    pub title: &'static str,
}

const fn l(id: &'static str, term: u8, title: &'static str) -> Lesson {
    Lesson { id, term, title }
}

pub const LESSONS: [Lesson; 28] = [
    l("t1-01", 1, "Programming and C"),
    l("t1-02", 1, "Fundamentals"),
    l("t1-03", 1, "Data Types"),
    l("t1-04", 1, "Numeral Systems"),
    l("t1-05", 1, "Variables and Constants"),
    l("t1-06", 1, "Data Type Transformations"),
    l("t1-07", 1, "Operators"),
    l("t1-08", 1, "Basic Input/Output"),
    l("t1-09", 1, "Program Control"),
    l("t1-10", 1, "Loops 1: for"),
    l("t1-11", 1, "Loops 2: do/while"),
    l("t1-12", 1, "Preprocessors"),
    l("t1-13", 1, "Functions"),
    l("t1-14", 1, "Arrays"),
    l("t2-01", 2, "Pointers"),
    l("t2-02", 2, "Sorting 1"),
    l("t2-03", 2, "Sorting 2"),
    l("t2-04", 2, "Searching"),
    l("t2-05", 2, "Structural Data Types"),
    l("t2-06", 2, "File Operations 1: Text Files"),
    l("t2-07", 2, "File Operations 2: Binary Files"),
    l("t2-08", 2, "Determiners"),
    l("t2-09", 2, "Dynamic Memory"),
    l("t2-10", 2, "Graphic"),
    l("t2-11", 2, "Ports"),
    l("t2-12", 2, "Basic Functions 1"),
    l("t2-13", 2, "Basic Functions 2"),
    l("t2-14", 2, "Basic Functions 3"),
];

/// Lessons in one term; the default page-view denominator.
pub const LESSONS_PER_TERM: usize = 14;

pub fn lesson(id: &str) -> Option<&'static Lesson> {
    LESSONS.iter().find(|l| l.id == id)
}

pub fn is_lesson(id: &str) -> bool {
    lesson(id).is_some()
}

pub fn term_lessons(term: u8) -> impl Iterator<Item = &'static Lesson> {
    LESSONS.iter().filter(move |l| l.term == term)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_terms_of_fourteen() {
        assert_eq!(term_lessons(1).count(), LESSONS_PER_TERM);
        assert_eq!(term_lessons(2).count(), LESSONS_PER_TERM);
        assert_eq!(lesson("t1-10").unwrap().title, "Loops 1: for");
        assert!(!is_lesson("t3-01"));
    }
}
