/// Program text and the expected value of its last form, hand-evaluated.
pub const FIXTURES: &[(&str, &str)] = &[
    ("42", "42"),
    ("(+ 1 2 3)", "6"),
    ("(- 10 4 3)", "3"),
    ("(- 5)", "-5"),
    ("(* 2 3 7)", "42"),
    ("(/ 12 4)", "3"),
    ("(/ 1 4)", "0.25"),
    ("(quotient 17 5)", "3"),
    ("(remainder -17 5)", "-2"),
    ("(modulo -17 5)", "3"),
    ("(max 3 9 4)", "9"),
    ("(min 3 9 4)", "3"),
    ("(abs -8)", "8"),
    ("(gcd 12 18)", "6"),
    ("(lcm 4 6)", "12"),
    ("(expt 2 10)", "1024"),
    ("(expt 2 100)", "1267650600228229401496703205376"),
    ("(sqrt 49)", "7"),
    ("(sqrt 2.0)", "1.4142135623730951"),
    ("(exact->inexact 3)", "3.0"),
    ("(< 1 2 3)", "#t"),
    ("(< 1 3 2)", "#f"),
    ("(= 2 2.0)", "#t"),
    ("(zero? 0)", "#t"),
    ("(even? 7)", "#f"),
    ("(not #f)", "#t"),
    ("(and 1 2 3)", "3"),
    ("(and 1 #f 3)", "#f"),
    ("(or #f 5)", "5"),
    ("(or)", "#f"),
    ("(if (> 3 2) 'yes 'no)", "yes"),
    ("(if #f #f 7)", "7"),
    ("((lambda (x) (* x x)) 7)", "49"),
    ("((lambda (x y) (+ x y)) 3 4)", "7"),
    ("((lambda args args) 1 2 3)", "(1 2 3)"),
    ("((lambda (a . rest) rest) 1 2 3)", "(2 3)"),
    ("(define (sqr x) (* x x)) (sqr 12)", "144"),
    ("(define (pow4 x) (define (sqr x) (* x x)) (sqr (sqr x))) (pow4 3)", "81"),
    ("(define (pow4 x) (define (sqr x) (* x x)) (sqr (sqr x))) (pow4 2)", "16"),
    ("(define (fact n) (if (= n 0) 1 (* n (fact (- n 1))))) (fact 10)", "3628800"),
    ("(define (fact n) (if (= n 0) 1 (* n (fact (- n 1))))) (fact 25)", "15511210043330985984000000"),
    ("(define (fib n) (if (< n 2) n (+ (fib (- n 1)) (fib (- n 2))))) (fib 15)", "610"),
    ("(let ((x 2) (y 3)) (* x y))", "6"),
    ("(let* ((x 2) (y (+ x 1))) (* x y))", "6"),
    ("(letrec ((ev? (lambda (n) (if (= n 0) #t (od? (- n 1))))) (od? (lambda (n) (if (= n 0) #f (ev? (- n 1)))))) (ev? 100))", "#t"),
    ("(let loop ((i 0) (acc 0)) (if (> i 10) acc (loop (+ i 1) (+ acc i))))", "55"),
    ("(do ((i 0 (+ i 1)) (s 0 (+ s i))) ((= i 5) s))", "10"),
    ("(cond ((> 1 2) 'a) ((> 2 1) 'b) (else 'c))", "b"),
    ("(cond ((assv 2 '((1 . one) (2 . two))) => cdr) (else 'none))", "two"),
    ("(case (* 2 3) ((2 3 5 7) 'prime) ((1 4 6 8 9) 'composite))", "composite"),
    ("(define x 1) (set! x (+ x 41)) x", "42"),
    ("(begin 1 2 3)", "3"),
    ("(quote (a b c))", "(a b c)"),
    ("'(1 . 2)", "(1 . 2)"),
    ("(cons 1 '(2 3))", "(1 2 3)"),
    ("(car '(a b c))", "a"),
    ("(cdr '(a b c))", "(b c)"),
    ("(cadr '(a b c))", "b"),
    ("(list 1 2 (+ 1 2))", "(1 2 3)"),
    ("(length '(a b c d))", "4"),
    ("(append '(1 2) '(3) '() '(4 5))", "(1 2 3 4 5)"),
    ("(reverse '(1 2 3))", "(3 2 1)"),
    ("(list-tail '(a b c d) 2)", "(c d)"),
    ("(list-ref '(a b c d) 3)", "d"),
    ("(memq 'c '(a b c d))", "(c d)"),
    ("(member '(1) '((0) (1) (2)))", "((1) (2))"),
    ("(assq 'b '((a 1) (b 2)))", "(b 2)"),
    ("(null? '())", "#t"),
    ("(pair? '())", "#f"),
    ("(equal? '(1 (2 3)) '(1 (2 3)))", "#t"),
    ("(eqv? 2 2)", "#t"),
    ("(map (lambda (x) (* x 10)) '(1 2 3))", "(10 20 30)"),
    ("(map + '(1 2) '(10 20))", "(11 22)"),
    ("(apply + 1 2 '(3 4))", "10"),
    ("(let ((n 0)) (for-each (lambda (x) (set! n (+ n x))) '(1 2 3)) n)", "6"),
    ("(force (delay (+ 1 2)))", "3"),
    ("(+ 1 (call-with-current-continuation (lambda (k) (+ 10 (k 5)))))", "6"),
    ("(call-with-values (lambda () (values 1 2)) +)", "3"),
    ("(string-append \"ab\" \"cd\")", "\"abcd\""),
    ("(string-length \"hello\")", "5"),
    ("(substring \"hello\" 1 3)", "\"el\""),
    ("(string->symbol \"abc\")", "abc"),
    ("(symbol->string 'abc)", "\"abc\""),
    ("(char->integer #\\A)", "65"),
    ("(char-upcase #\\a)", "#\\A"),
    ("(string->list \"ab\")", "(#\\a #\\b)"),
    ("(number->string 255)", "\"255\""),
    ("(procedure? car)", "#t"),
    ("(define (compose f g) (lambda (x) (f (g x)))) ((compose car cdr) '(1 2 3))", "2"),
    ("(define (count n) (if (= n 0) 'done (count (- n 1)))) (count 50000)", "done"),
];

/// Programs that never finish.
pub const DIVERGENT: &[&str] = &[
    "((lambda (f) (f f)) (lambda (g) (g g)))",
    "(define (spin) (spin)) (spin)",
    "(let loop ((i 0)) (loop (+ i 1)))",
    "(do ((i 0 (+ i 1))) (#f i))",
];
