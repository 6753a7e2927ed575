"""
Lark grammar shared by the type, process and context parsers.

Payloads of ? and ! are atoms: a prefixed or recursive payload needs
parentheses, as in !(rec X.?X.X).X. Prefixes bind tighter than |.
"""

from lark import Lark

GRAMMAR = r"""
?type: payload
     | "rec" NAME "." type                          -> rec
     | [qualifier] "?" payload ["." type]           -> receive
     | [qualifier] "!" payload ["." type]           -> send

?payload: "end"                                     -> end
        | NAME                                      -> name
        | "(" type ")"
        | [qualifier] "&" "{" arm ("," arm)* "}"    -> ext_choice
        | [qualifier] "+" "{" arm ("," arm)* "}"    -> int_choice

arm: NAME ":" type

!qualifier: "un" | "lin"

?process: prefixed
        | process "|" prefixed                      -> par

?prefixed: "0"                                              -> inact
         | NAME "!" "(" NAME ")" "." prefixed               -> output
         | NAME "?" "(" NAME [":" type] ")" "." prefixed    -> input
         | NAME ">>" "{" branch_arm ("," branch_arm)* "}"   -> branch
         | NAME "<<" NAME "." prefixed                      -> select
         | "*" prefixed                                     -> repl
         | "new" "(" NAME "," NAME [":" type] ")" prefixed  -> restrict
         | "(" process ")"

branch_arm: NAME ":" process

context: [binding ("," binding)*]

?binding: NAME ":" type                             -> typed_binding
        | NAME ":" STATE_REF                        -> state_binding

STATE_REF: /@[^\s,]+/
NAME: /[A-Za-z][A-Za-z0-9_]*/

%import common.WS
%ignore WS
"""

PARSER = Lark(
    GRAMMAR,
    start=["type", "process", "context"],
    parser="lalr",
    maybe_placeholders=True,
)
