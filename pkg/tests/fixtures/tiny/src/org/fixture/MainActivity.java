package org.fixture;

import android.app.Activity;
import android.os.Bundle;

public class MainActivity extends Activity {
    protected void onCreate(Bundle savedInstanceState) {
        super.onCreate(savedInstanceState);
        Parser parser = new Parser();
        parser.parse("abc");
    }

    void helper() {
        // never called
    }
}

class Parser {
    Parser() {
    }

    void parse(String s) {
        if (s.isEmpty()) {
            return;
        }
        tokenize(s);
    }

    void tokenize(String s) {
        parse(s.substring(1));
    }
}

class Printer {
    void print() {
    }

    static String format(int x) {
        return "#" + x;
    }
}
