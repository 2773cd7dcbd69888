/* Raw keyboard reader with PIN masking. */
#include <stdio.h>
#include <termios.h>

int kbdread(char *buf, int len, int mask)
{
    struct termios old, raw;
    tcgetattr(0, &old);
    raw = old;
    raw.c_lflag &= ~(ICANON | ECHO);
    tcsetattr(0, TCSANOW, &raw);
    int n = 0;
    while (n < len - 1) {
        int c = getchar();
        if (c == '\n') break;
        buf[n++] = (char)c;
        putchar(mask ? '*' : c);
    }
    buf[n] = 0;
    tcsetattr(0, TCSANOW, &old);
    return n;
}
